"""Python access to the gvckit core: MRIO coefficients, value-added decomposition,
GVC indices and the trade-share event study."""

from ._core import (
    CoefMatrices,
    ConfigError,
    DegenerateFit,
    EffectEstimate,
    GvcIndices,
    InvalidInput,
    MrioTable,
    NumericalError,
    ParseError,
    __version__,
    coefficients,
    decompose,
    estimate_ols,
    indices,
    load_mrio,
    run_cli,
    synth_event_study,
    synth_mrio,
    validate_mrio,
    write_mrio,
)

__all__ = [
    "CoefMatrices",
    "ConfigError",
    "DegenerateFit",
    "EffectEstimate",
    "GvcIndices",
    "InvalidInput",
    "MrioTable",
    "NumericalError",
    "ParseError",
    "__version__",
    "coefficients",
    "decompose",
    "estimate_ols",
    "indices",
    "load_mrio",
    "run_cli",
    "synth_event_study",
    "synth_mrio",
    "validate_mrio",
    "write_mrio",
]
