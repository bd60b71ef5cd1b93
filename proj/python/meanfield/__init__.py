from _meanfield import (  # noqa: F401
    BlowupError,
    ConfigError,
    FormatError,
    config_hash,
    eval_drift,
    fit,
    gaussian_kde,
    mvnn_drift_all,
    read_trajectory,
    rollout,
    sample_initial,
    silverman_bandwidth,
    simulate,
    sliced_wasserstein,
    wasserstein_1d,
)
