"""Core data records shared by the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LABEL_IR = 0
LABEL_MR = 1
LABEL_HR = 2
LABEL_NAMES = {LABEL_IR: "IR", LABEL_MR: "MR", LABEL_HR: "HR"}


@dataclass
class Product:
    product_id: str
    title: list[str]
    image_features: np.ndarray
    aisle: int
    description: list[str] | None = None
    detail: list[str] | None = None

    def __post_init__(self):
        if not self.title:
            raise ValueError(f"product {self.product_id}: empty title")
        if not np.all(np.isfinite(self.image_features)):
            raise ValueError(f"product {self.product_id}: non-finite image features")


@dataclass
class Query:
    query_id: str
    text: list[str]

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"query {self.query_id}: empty text")
        self.text = [t.lower() for t in self.text]


@dataclass(frozen=True)
class RelevanceTriple:
    query_id: str
    product_id: str
    label: int

    def __post_init__(self):
        if self.label not in LABEL_NAMES:
            raise ValueError(f"invalid relevance label {self.label}")


@dataclass
class EngagementEvent:
    user_id: str
    query_id: str
    product_id: str
    click: int
    timestamp: int
    position: int
    user_past_clicks: int
    query_freq: float
    purchase_history: list[str] = field(default_factory=list)


class Catalog:
    """Products plus the planted vocabulary structure they were drawn from.

    Aisle sub-vocabularies are disjoint from each other and from the pool of
    product-specific tokens, which is what makes the relevance oracle a pure
    function of (query tokens, product).
    """

    def __init__(
        self,
        products: list[Product],
        aisle_vocabs: list[list[str]],
        specific_pool: list[str],
        aisle_centers: np.ndarray,
    ):
        self.products = products
        self.aisle_vocabs = aisle_vocabs
        self._aisle_vocab_sets = [set(v) for v in aisle_vocabs]
        self.specific_pool = specific_pool
        self._specific_set = set(specific_pool)
        self.aisle_centers = aisle_centers
        self.by_id = {p.product_id: p for p in products}

    @property
    def n_aisles(self) -> int:
        return len(self.aisle_vocabs)

    def aisle_vocab(self, aisle: int) -> set[str]:
        return self._aisle_vocab_sets[aisle]

    def specific_tokens(self, product: Product) -> set[str]:
        """Product-identifying tokens: title tokens outside every aisle vocabulary."""
        return {t for t in product.title if t in self._specific_set}

    def vocabulary(self) -> list[str]:
        tokens: list[str] = []
        for v in self.aisle_vocabs:
            tokens.extend(v)
        tokens.extend(self.specific_pool)
        return tokens
