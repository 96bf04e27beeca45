"""Tree-game correlated-equilibrium toolkit.

Exact K-EFCE / trigger / NFCCE / NFCE gap evaluation and uncoupled no-regret
learners (full feedback and bandit feedback with balanced sampling) backed by
the C++ core.
"""

from kefce._core import (  # noqa: F401
    CorrelatedPolicy,
    GapReport,
    KefceError,
    TreeGame,
    episodes_per_round,
    gen_containment_game,
    gen_kuhn_poker,
    gen_nfce_example,
    gen_random_game,
    kefce_gap,
    kefce_gap_bruteforce,
    learning_rate_full,
    load_policy,
    nfcce_gap,
    nfce_gap,
    run_kefr_bandit,
    run_kefr_full,
    trigger_gap,
    value,
)

__all__ = [
    "CorrelatedPolicy",
    "GapReport",
    "KefceError",
    "TreeGame",
    "episodes_per_round",
    "gen_containment_game",
    "gen_kuhn_poker",
    "gen_nfce_example",
    "gen_random_game",
    "kefce_gap",
    "kefce_gap_bruteforce",
    "learning_rate_full",
    "load_policy",
    "nfcce_gap",
    "nfce_gap",
    "run_kefr_bandit",
    "run_kefr_full",
    "trigger_gap",
    "value",
]
