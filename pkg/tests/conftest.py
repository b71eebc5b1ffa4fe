import numpy as np
import pytest

from onodance.factmodel import ModelConfig
from onodance.fixtures import write_fixtures
from onodance.motion import default_skeleton, feature_dim
from onodance.symbolism import QuantificationDictionary, default_rule_table


@pytest.fixture(scope="session")
def table():
    return default_rule_table()


@pytest.fixture(scope="session")
def empty_dictionary(table):
    return QuantificationDictionary(table_version=table.version, entries={})


@pytest.fixture(scope="session")
def skeleton():
    return default_skeleton()


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    write_fixtures(out, seed=7)
    return out


@pytest.fixture(scope="session")
def small_config(skeleton):
    """Small-but-real model used by trainer/generator/CLI tests."""
    return ModelConfig(motion_dim=feature_dim(skeleton), hidden_dim=32,
                       motion_layers=1, cond_layers=1, cross_layers=2,
                       heads=2, init_seed=11)


@pytest.fixture(scope="session")
def small_checkpoint(tmp_path_factory, fixture_dir, small_config, table,
                     empty_dictionary):
    """A briefly trained small model checkpoint, shared across tests."""
    from onodance.factmodel import save_checkpoint
    from onodance.trainer import TrainConfig, load_manifest, train

    dataset = load_manifest(fixture_dir / "manifest.json", empty_dictionary,
                            table)
    cfg = TrainConfig(model=small_config, learning_rate=1e-3, batch_size=2,
                      total_steps=40, window_stride=40, seed=5)
    result = train(dataset, cfg)
    path = tmp_path_factory.mktemp("ckpt") / "small.onof"
    save_checkpoint(result.model, path)
    return path
