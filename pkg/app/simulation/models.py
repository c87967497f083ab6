import enum


class Strategy(str, enum.Enum):
    """Modeling strategy scored by the comparison"""
    RCRS = "rcrs"              # RCRS fit, predicted through the sliding geometry
    HYBRID_RSM = "hybrid_rsm"  # NEM fit interpolated into an RSM model
    DIRECT_RSM = "direct_rsm"  # RSM fit on proportionally coded factors

    @property
    def label(self) -> str:
        return self.value.replace("_", "-")
