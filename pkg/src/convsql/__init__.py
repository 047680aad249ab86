"""Auxiliary supervision toolkit for conversational text-to-SQL.

Derives turn-switch and per-column usage-change labels by structurally
diffing consecutive gold SQL queries, serializes conversations into
training records, scores predictions with exact set matching, and ships a
framework-free reference implementation of the multi-task loss math.
"""

from .errors import (
    AlignmentError,
    AmbiguousColumnError,
    ConvSqlError,
    DatasetFormatError,
    RecordValidationError,
    SchemaFormatError,
    SchemaMismatchError,
    SchemaValidationError,
    SqlSyntaxError,
    TaxonomyError,
    UnknownColumnError,
    UnknownTableError,
    UnrenderableQueryError,
    UnsupportedSqlError,
)
from .evaluate import EvalReport, evaluate, exact_set_match
from .parser import parse_sql
from .records import (
    Conversation,
    RecordConfig,
    TrainingRecord,
    Turn,
    build_conversation_records,
    build_record,
    export_records,
    import_records,
)
from .schema import ColumnDef, Schema, load_schemas, resolve_column, schema_items
from .schemadiff import (
    ColumnChangeLabel,
    diff_schema_usage,
    diff_schema_usage_explain,
    label_prefix,
)
from .sqlast import (
    AggExpr,
    Arith,
    BoolOp,
    ColumnRef,
    ColumnUsage,
    Comparison,
    FromClause,
    JoinCond,
    Literal,
    OrderItem,
    SelectItem,
    SqlQuery,
    Subquery,
    collect_column_usages,
    normalize,
    to_text,
)
from .taxonomy import (
    Taxonomy,
    build_taxonomy,
    default_column_taxonomy,
    default_taxonomy,
    load_taxonomy,
)
from .turndiff import TurnSwitchLabel, diff_turn, diff_turn_explain, label_conversation

__version__ = "0.1.0"
