"""Category schemas: named, ordered blocks partitioning the feature columns."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DataFormatError, SchemaOverlap, UnknownCategory


@dataclass(frozen=True)
class CategorySchema:
    """Ordered partition of feature columns into named category blocks.

    ``categories`` is a tuple of (name, columns) pairs. Order is significant:
    datasets loaded against a schema have their columns rearranged so that
    each category occupies one contiguous block, in schema order.
    """

    categories: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        seen_names: set[str] = set()
        seen_cols: set[str] = set()
        if not self.categories:
            raise DataFormatError("schema has no categories")
        for name, cols in self.categories:
            if not name:
                raise DataFormatError("category name must be non-empty")
            if name in seen_names:
                raise DataFormatError(f"duplicate category name {name!r}")
            seen_names.add(name)
            if len(cols) == 0:
                raise DataFormatError(f"category {name!r} has no columns")
            for c in cols:
                if c in seen_cols:
                    raise SchemaOverlap(f"column {c!r} appears in more than one category")
                seen_cols.add(c)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.categories)

    @property
    def feature_names(self) -> tuple[str, ...]:
        """All columns in schema order (categories contiguous)."""
        return tuple(c for _, cols in self.categories for c in cols)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def columns_of(self, name: str) -> tuple[str, ...]:
        for cat, cols in self.categories:
            if cat == name:
                return cols
        raise UnknownCategory(f"no category named {name!r}")

    def block_slice(self, name: str) -> slice:
        """Contiguous column range of a category, in schema column order."""
        start = 0
        for cat, cols in self.categories:
            if cat == name:
                return slice(start, start + len(cols))
            start += len(cols)
        raise UnknownCategory(f"no category named {name!r}")

    def column_indices(self, columns) -> list[int]:
        """Map column names to their positions in schema order."""
        pos = {c: i for i, c in enumerate(self.feature_names)}
        out = []
        for c in columns:
            if c not in pos:
                raise UnknownCategory(f"no column named {c!r} in schema")
            out.append(pos[c])
        return out

    def subset(self, names) -> "CategorySchema":
        """Schema restricted to the given categories, order preserved."""
        keep = set(names)
        missing = keep - set(self.names)
        if missing:
            raise UnknownCategory(f"no category named {sorted(missing)[0]!r}")
        return CategorySchema(tuple((n, c) for n, c in self.categories if n in keep))

    def to_dict(self) -> dict:
        return {
            "categories": [
                {"name": name, "columns": list(cols)} for name, cols in self.categories
            ]
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CategorySchema":
        try:
            cats = tuple(
                (entry["name"], tuple(entry["columns"])) for entry in obj["categories"]
            )
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed schema object: {exc}") from exc
        return cls(cats)

    @classmethod
    def from_json(cls, path) -> "CategorySchema":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"schema file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(obj)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
