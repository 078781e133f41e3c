import os
from dataclasses import fields
from types import SimpleNamespace

import pytest

from reasonforge.cli import ENV_PREFIX, RunConfig
from reasonforge.evaluation import EvalConfig, evaluate
from reasonforge.pipeline import (
    MASK_A_S_HINT_P,
    GenerationSettings,
    run_corpus,
)
from reasonforge.transport import CachingTransport

from ._fakes import ScriptedTransport, make_corpus, write_corpus_fixture

RUN_SEED = 7
MODEL = "fake-model"

_CONFIG_ENV_KEYS = [ENV_PREFIX + f.name.upper() for f in fields(RunConfig)]


@pytest.fixture(autouse=True)
def _scrub_config_env(monkeypatch):
    # layered config reads these; a developer's shell must not leak into tests
    for key in _CONFIG_ENV_KEYS:
        monkeypatch.delenv(key, raising=False)


@pytest.fixture
def ten_corpus():
    return make_corpus(10)


@pytest.fixture(scope="session")
def datadir():
    from pathlib import Path

    return Path(__file__).parent / "data"


def _settings() -> GenerationSettings:
    return GenerationSettings(model=MODEL, run_seed=RUN_SEED, concurrency=4)


def record_workspace(root):
    """Record every replay fixture the acceptance and CLI tests depend on."""
    corpus = make_corpus(10)
    manifest_path = write_corpus_fixture(root, corpus)

    replay = root / "replay"
    recorder = CachingTransport(ScriptedTransport(), replay)
    staged = run_corpus(
        corpus,
        transport=recorder,
        settings=_settings(),
        corpus_name="fixture10",
        method="staged",
    )
    for protocol in ("cot", "self_consistency"):
        evaluate(
            corpus,
            EvalConfig(protocol=protocol, model=MODEL, run_seed=RUN_SEED),
            recorder,
            corpus_name="fixture10",
        )

    ablation_replay = root / "replay_ablation"
    ablation_recorder = CachingTransport(ScriptedTransport(), ablation_replay)
    ablation = run_corpus(
        corpus,
        transport=ablation_recorder,
        settings=_settings(),
        mask=MASK_A_S_HINT_P,
        corpus_name="fixture10",
        method="staged",
    )

    return SimpleNamespace(
        root=root,
        corpus=corpus,
        manifest_path=manifest_path,
        replay=replay,
        ablation_replay=ablation_replay,
        staged_result=staged,
        ablation_result=ablation,
        run_seed=RUN_SEED,
        model=MODEL,
    )


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    return record_workspace(tmp_path_factory.mktemp("recorded"))
