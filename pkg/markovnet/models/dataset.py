from typing import Optional, Sequence

import numpy as np

from models.errors import EmptyDataset, SchemaViolation
from models.markov_network import Schema


def infer_schema(rows: np.ndarray) -> Schema:
    """Arity of each column is max value + 1, at least 2"""
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise EmptyDataset("Cannot infer a schema from an empty dataset")
    return Schema(tuple(max(2, int(v) + 1) for v in rows.max(axis=0)))


class Dataset:
    """Complete assignments sharing one schema"""

    def __init__(self, schema: Schema, rows):
        rows = np.array(rows, dtype=np.int64)
        if rows.size == 0:
            rows = rows.reshape(0, len(schema))
        if rows.ndim != 2 or rows.shape[1] != len(schema):
            raise SchemaViolation(f"Rows must have {len(schema)} columns, got shape {rows.shape}")
        arities = np.array(schema.arities)
        bad = (rows < 0) | (rows >= arities)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise SchemaViolation(
                f"Row {row} has value {rows[row, col]} outside arity {arities[col]} of variable {col}"
            )
        rows.setflags(write=False)
        self.schema = schema
        self.rows = rows

    @staticmethod
    def from_rows(rows: Sequence[Sequence[int]], schema: Optional[Schema] = None) -> 'Dataset':
        rows = np.asarray(rows, dtype=np.int64)
        if schema is None:
            schema = infer_schema(rows)
        return Dataset(schema, rows)

    def __len__(self):
        return self.rows.shape[0]

    def __iter__(self):
        return iter(self.rows)

    def __repr__(self):
        return f"Dataset(rows={len(self)}, variables={len(self.schema)})"

    @property
    def num_variables(self) -> int:
        return len(self.schema)

    def require_rows(self, what: str = 'this operation'):
        if len(self) == 0:
            raise EmptyDataset(f"Empty dataset given to {what}")

    def subset(self, indices) -> 'Dataset':
        return Dataset(self.schema, self.rows[indices])
