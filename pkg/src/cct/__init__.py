"""Code comparison tuning at desk scale.

Lex code, manufacture single-edit buggy counterparts, build token- and
sequence-level comparison training data, train a micro decoder-only LM with
a three-term objective, and score bug fixing with an unbiased pass@k
harness.
"""

from .lexer import (
    CodeBlock,
    SourceUnit,
    Token,
    TokenKind,
    detokenize,
    extract_code_blocks,
    tokenize,
)
from .mutation import (
    MutantPair,
    MutationCandidate,
    MutationKind,
    apply_mutation,
    enumerate_candidates,
    make_counterpart,
)
from .samples import (
    TEMPLATES,
    CctRecord,
    ComparisonSample,
    InstructionSample,
    Template,
    build_cct_dataset,
    build_comparison,
    first_diff_index,
    render_template,
)
from .vocab import Vocabulary

__version__ = "0.1.0"
