from importlib import resources

import pytest
from hypothesis import settings

from mpifutures.dsl import parse_model

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def model_text(name: str) -> str:
    return resources.files("mpifutures").joinpath("models", f"{name}.fut").read_text()


def load(name: str):
    return parse_model(model_text(name))


@pytest.fixture(scope="session")
def election():
    return load("election")


@pytest.fixture(scope="session")
def producer():
    return load("producer")


@pytest.fixture(scope="session")
def models_dir():
    return resources.files("mpifutures").joinpath("models")


def trace_events(rank, observed):
    """Simulator-style trace events for one rank's ``(op, peer, data)`` sequence."""
    from mpifutures.simulator import TraceEvent

    out = []
    for k, (op, peer, data) in enumerate(observed):
        if op in ("send", "recv"):
            args = (peer, data)
        elif op == "bcast":
            args = (data,)
        else:
            args = ()
        out.append(TraceEvent(rank, k, op, args, peer, k + 1))
    return out
