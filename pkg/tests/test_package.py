import importlib

import pytest

MODULES = ["model", "kernels", "stability", "noise", "solver", "moments",
           "renewal", "convergence", "checks", "output", "cli"]


@pytest.mark.parametrize("name", MODULES)
def test_public_exports_resolve(name):
    mod = importlib.import_module(f"shelab.{name}")
    for symbol in getattr(mod, "__all__", []):
        assert hasattr(mod, symbol), f"shelab.{name} exports missing {symbol}"


def test_version_matches_manifest_stamp():
    import shelab
    from shelab.output import RunManifest

    manifest = RunManifest(config={}, seed=0)
    assert shelab.__version__ in manifest.header_line()
