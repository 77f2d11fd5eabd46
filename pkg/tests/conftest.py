import pytest

from glassbox import pipeline as P
from glassbox.config import PipelineConfig
from glassbox.report import generate_report

# Small-network fixture that still trains to 100% on its own test split,
# so feature/receptive-field behavior is meaningful, not noise.
TINY = PipelineConfig(
    num_classes=4, pool_size=8, attributes_per_class=2,
    train_per_class=40, test_per_class=6,
    architecture="small", epochs=20, batch_size=16, learning_rate=0.1,
    stats_top_n=20, images_per_feature=4,
    ablation_max_deleted=4, ablation_trials=2,
    workers_per_question=2, seed=0,
)


@pytest.fixture(scope="session")
def tiny_cfg():
    return TINY


@pytest.fixture(scope="session")
def tiny_home(tmp_path_factory, tiny_cfg):
    """One fully-populated artifact directory shared by the whole session."""
    home = str(tmp_path_factory.mktemp("tiny_home"))
    P.cmd_gen_data(tiny_cfg, home)
    P.cmd_train(tiny_cfg, home)
    P.cmd_analyze(tiny_cfg, home)
    P.cmd_rf(tiny_cfg, home)
    P.cmd_ablate(tiny_cfg, home)
    P.cmd_annotate_export(tiny_cfg, home)
    P.cmd_auto_annotate(tiny_cfg, home)
    P.cmd_consistency(tiny_cfg, home, oracle=True)
    generate_report(tiny_cfg, home)
    return home


@pytest.fixture(scope="session")
def tiny_ctx(tiny_cfg, tiny_home):
    return P.build_context(tiny_cfg, tiny_home)
