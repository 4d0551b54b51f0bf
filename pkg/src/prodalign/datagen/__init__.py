from .types import (
    Catalog,
    EngagementEvent,
    LABEL_HR,
    LABEL_IR,
    LABEL_MR,
    LABEL_NAMES,
    Product,
    Query,
    RelevanceTriple,
)
from .catalog import generate_catalog
from .relevance import generate_relevance, oracle_label
from .engagement import EngagementLog, EngagementParams, generate_engagements

__all__ = [
    "Catalog",
    "EngagementEvent",
    "EngagementLog",
    "EngagementParams",
    "LABEL_HR",
    "LABEL_IR",
    "LABEL_MR",
    "LABEL_NAMES",
    "Product",
    "Query",
    "RelevanceTriple",
    "generate_catalog",
    "generate_engagements",
    "generate_relevance",
    "oracle_label",
]
