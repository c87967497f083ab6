import enum


class CodingScheme(str, enum.Enum):
    """Effect coding scheme of a model matrix"""
    RCRS = "rcrs"            # Re-centered and re-scaled slid factor
    NEM = "nem"              # Slid effects nested in parent levels
    RSM = "rsm"              # Proportionally coded polynomial terms
    COVARIATE = "covariate"  # Contrasts of the free factors only

    @property
    def label(self) -> str:
        return self.value.upper()
