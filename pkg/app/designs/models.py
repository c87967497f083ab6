import enum


class FactorKind(str, enum.Enum):
    """Factor kind"""
    QUANTITATIVE = "quantitative"
    QUALITATIVE = "qualitative"


class FactorRole(str, enum.Enum):
    """Role of a factor in the sliding structure"""
    FREE = "free"        # Not involved in any sliding
    PARENT = "parent"    # Other factors slide on it
    SLID = "slid"        # Settings depend on the parent level
