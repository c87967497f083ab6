import enum


class Command(str, enum.Enum):
    """Subcommands of the slidekit CLI"""
    CODE = "code"
    FIT = "fit"
    TRANSLATE = "translate"
    PREDICT = "predict"
    REGION = "region"
    SIMULATE = "simulate"
    FIXTURE = "fixture"


class ReportFormat(str, enum.Enum):
    JSON = "json"    # Lossless, sorted keys
    TABLE = "table"  # Rounded for reading
    CSV = "csv"


class ModelSource(str, enum.Enum):
    """What `translate --from` starts from"""
    NEM = "nem"
    RCRS = "rcrs"
    RSM = "rsm"
