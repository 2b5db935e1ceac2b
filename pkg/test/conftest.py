"""Shared fixtures and builders."""

from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import pytest
from hypothesis import strategies as st

from ssf.protocol.messages import (
    GENESIS,
    Block,
    BlockId,
    Checkpoint,
    FfgVote,
    HeadVote,
    genesis_checkpoint,
)
from ssf.protocol.view import View
from ssf.simnet.scenario import Latency, Scenario, load_scenario
from ssf.simnet.world import SimulationResult, run

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def block(parent: BlockId, slot: int, proposer: int = 0, tag: str = "") -> Block:
    return Block(parent=parent, slot=slot, proposer=proposer, body=tag.encode())


def chain(length: int, parent: BlockId = GENESIS.id, tag: str = "") -> List[Block]:
    """Blocks of slots 1..length extending parent, one per slot."""
    blocks = []
    for slot in range(1, length + 1):
        blocks.append(block(parent, slot, tag=f"{tag}{slot}"))
        parent = blocks[-1].id
    return blocks


def head_votes(target: BlockId, slot: int, voters: Iterable[int]) -> List[HeadVote]:
    return [HeadVote(block=target, slot=slot, voter=i) for i in voters]


def ffg_votes(
    source: Checkpoint, target: Checkpoint, voters: Iterable[int]
) -> List[FfgVote]:
    return [FfgVote(source=source, target=target, voter=i) for i in voters]


def view_of(*groups: Sequence) -> View:
    """View holding genesis and every message of the given groups."""
    view = View([GENESIS])
    for group in groups:
        view.add_all(group)
    return view


@st.composite
def trees(draw, max_blocks: int = 11) -> List[Block]:
    """Random block trees of at most max_blocks blocks below genesis, genesis
    first.
    """
    blocks = [GENESIS]
    for k in range(draw(st.integers(min_value=1, max_value=max_blocks))):
        parent = blocks[draw(st.integers(min_value=0, max_value=len(blocks) - 1))]
        slot = parent.slot + draw(st.integers(min_value=1, max_value=3))
        blocks.append(block(parent.id, slot, tag=str(k)))
    return blocks


@st.composite
def justified_views(draw, n: int = 6) -> View:
    """Random trees with head votes and FFG links of random support, so that
    the latest justified checkpoint is often not genesis.
    """
    blocks = draw(trees())
    g0 = genesis_checkpoint()
    checkpoints = [g0] + [
        Checkpoint(b.id, b.slot + draw(st.integers(min_value=0, max_value=2)))
        for b in blocks[1:]
    ]
    view = View(blocks)
    for _ in range(draw(st.integers(min_value=0, max_value=6))):
        source = draw(st.one_of(st.just(g0), st.sampled_from(checkpoints)))
        target = draw(st.sampled_from(checkpoints))
        support = draw(st.integers(min_value=0, max_value=n))
        view.add_all(ffg_votes(source, target, range(support)))
    for voter in range(n):
        if draw(st.booleans()):
            b = draw(st.sampled_from(blocks))
            view.add(HeadVote(block=b.id, slot=b.slot, voter=voter))
    return view


def honest_scenario(
    n: int = 4,
    delta: int = 1,
    horizon: int = 8,
    seed: int = 0,
    random_latency: bool = False,
    **changes: object,
) -> Scenario:
    return Scenario(
        n=n,
        delta=delta,
        horizon=horizon,
        seed=seed,
        latency=Latency.RANDOM if random_latency else Latency.MAX,
        **changes,  # type: ignore[arg-type]
    )


@pytest.fixture(scope="session")
def smoke_run() -> SimulationResult:
    return run(honest_scenario(n=4, horizon=8))


@pytest.fixture
def scenario_dir(monkeypatch: pytest.MonkeyPatch) -> Path:
    monkeypatch.setenv("SSF_SCENARIO_DIR", str(SCENARIO_DIR))
    return SCENARIO_DIR


def run_file(name: str, seed: Optional[int] = None) -> SimulationResult:
    return run(load_scenario(str(SCENARIO_DIR / name)), seed=seed)
