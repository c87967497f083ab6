import enum


class Zone(str, enum.Enum):
    """Where a coded query point falls"""
    INSIDE_RE = "InsideRE"                    # Experimental region, boundary included
    EXTRAPOLATION_BAND = "ExtrapolationBand"  # Modeling cube outside the experimental region
    OUTSIDE_RM = "OutsideRM"                  # Outside [-1, 1]^2

    @property
    def is_extrapolation(self) -> bool:
        return self is not Zone.INSIDE_RE
