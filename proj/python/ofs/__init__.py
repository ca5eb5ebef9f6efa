"""Optimal filter selection: Python bindings over the C++ core."""

from ._ofs import (
    DegenerateFilter,
    ExplorationFailure,
    InvalidArgument,
    InvalidConfiguration,
    InvalidInput,
    IoError,
    Library,
    Metric,
    NotRepresentable,
    SamplingDegeneracy,
    Simulator,
    baseline_selection,
    calibrate_d_min,
    d1,
    d2,
    dd_mutation,
    desk_config,
    distinct_count,
    explore,
    generate_library,
    hamming,
    load_library,
    mwu_test,
    neighborhood,
    rank,
    read_runlog,
    run_campaign,
    run_solver,
    second_moment,
    select_diverse,
    sha256,
    stepsize_rate,
    welch_test,
)

__all__ = [name for name in dir() if not name.startswith("_")]
