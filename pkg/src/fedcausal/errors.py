"""Exception types shared across the package."""

from __future__ import annotations


class FedCausalError(Exception):
    """Base class for all package-specific errors."""


class AssumptionViolated(FedCausalError):
    """Some variable pair is held by no client, so its joint cumulant is not estimable.

    Attributes
    ----------
    pair : tuple
        The offending (variable_id, variable_id) pair.
    """

    def __init__(self, pair: tuple[str, str], message: str | None = None):
        self.pair = tuple(pair)
        super().__init__(
            message
            or f"no client holds variable pair ({self.pair[0]}, {self.pair[1]})"
        )


class NearSymmetricNoise(FedCausalError):
    """Third cumulants too close to zero to drive source identification.

    Raised when a selected source has |C3| below the guard, or when every
    variable's third cumulant is statistically indistinguishable from zero.
    The skew-based route is not identifiable here; a Gaussianity check and
    the correlation-based primitives are the fallback.

    Attributes
    ----------
    variable_ids : tuple of str
        Variables whose third cumulants were flagged.
    partial_order : tuple of str
        Causal order discovered before the failure (may be empty).
    """

    def __init__(
        self,
        variable_ids,
        partial_order=(),
        message: str | None = None,
    ):
        self.variable_ids = tuple(variable_ids)
        self.partial_order = tuple(partial_order)
        super().__init__(
            message
            or "third cumulant near zero for "
            + ", ".join(self.variable_ids)
            + (
                f" (partial order so far: {', '.join(self.partial_order)})"
                if self.partial_order
                else ""
            )
        )


class DegenerateConditioning(FedCausalError):
    """A partial-correlation denominator factor is numerically zero."""


class WireFormatError(FedCausalError):
    """Base class for upload encoding/decoding failures."""


class TruncatedPayload(WireFormatError):
    """Payload shorter than its framing requires."""


class VersionMismatch(WireFormatError):
    """Magic bytes or version byte do not match this codec."""


class ChecksumMismatch(WireFormatError):
    """CRC over the payload body failed."""
