"""Drive N bot players against a live run: `run_bots.py URI RUN_ID COUNT SEED START`.

Node ids are assigned by join order, so START offsets the agent seeds when
other clients join first. Exits 0 once every bot sees RunComplete.
"""

import asyncio
import sys

from hashlab.agents import CorpusSampler, init_agent, load_corpus, load_seed_pool
from hashlab.bots import BotBrain, run_bot
from hashlab.cli import _data_file
from hashlab.engine import derive_rng


async def main(uri: str, run_id: str, count: int, seed: int, start: int) -> None:
    pool = load_seed_pool(_data_file("seed_pool.txt"))
    sampler = CorpusSampler(load_corpus(_data_file("sim_corpus.txt")), pool)
    brains = [
        BotBrain(
            run_id=run_id,
            agent=init_agent(i, pool, derive_rng(seed, "init", start + i)),
            sampler=sampler,
            rng=derive_rng(seed, "agent", start + i),
        )
        for i in range(count)
    ]
    done = await asyncio.gather(*(run_bot(uri, b) for b in brains))
    bad = [b for b in done if b.error is not None]
    if bad:
        raise SystemExit(f"{len(bad)} bots failed: {bad[0].error}")
    print(f"{count} bots completed", flush=True)


if __name__ == "__main__":
    uri, run_id, count, seed, start = sys.argv[1:6]
    asyncio.run(main(uri, run_id, int(count), int(seed), int(start)))
