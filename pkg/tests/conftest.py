import pytest


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    """Run every shipped preset once; heavy, shared across acceptance tests.

    Returns {preset_name: list[RunResult]} for the trajectory presets.
    """
    from strobesim import cli

    out_root = tmp_path_factory.mktemp("preset-out")
    results = {}
    for name in cli.preset_names():
        cfg = cli.parse_config(name)
        cfg.output["dir"] = str(out_root / name)
        results[name] = cli.run(cfg, quiet=True)
    return results
