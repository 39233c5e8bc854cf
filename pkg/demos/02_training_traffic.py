#!/usr/bin/env python3
"""From a model configuration to the flows one training iteration generates.

A 176B-parameter model split 4-way (tensor) x 12-way (pipeline) and replicated
8 times occupies 384 GPUs. The 8 replicas of each of the 48 parameter shards
form a ring; synchronizing a shard makes every ring member send 2(N-1)/N of
the shard per iteration. At 100 Gbps that alone exceeds two seconds.
"""

from closroute import (
    MODEL_CATALOG,
    HardwareModel,
    Job,
    build_rings,
    build_topology,
    compute_phase_duration,
    place_job,
    ring_allreduce_commodities,
)

topo = build_topology(32, 64, 4, 8, link_capacity=100e9)
model = MODEL_CATALOG["BLOOM"]
dp = 8

placement = place_job(topo, model, dp, seed=0)
job = Job("bloom-demo", model, dp, arrival_time=0.0, num_iterations=10, placement=placement)
print(f"{model.name}: tp={model.tp} pp={model.pp} dp={dp} "
      f"-> {len(placement)} GPUs on {len({(e.tor, e.host) for e in placement})} hosts")

rings = build_rings(job)
shard_gb = rings[0].shard_bytes / 1e9
print(f"{len(rings)} rings of {dp} members, shard {shard_gb:.2f} GB "
      f"({model.num_params / 1e9:.0f}B params x 4 B / {model.tp * model.pp} slices)")

edges = ring_allreduce_commodities(rings[0], iteration=0)
volume_gbit = edges[0].volume * 8 / 1e9
print(f"each ring edge carries {volume_gbit:.1f} Gbit "
      f"(2 x {dp - 1}/{dp} of the shard)")
print(f"line-rate transfer time at 100 Gbps: {volume_gbit / 100:.2f} s "
      "- communication is seconds-long even on an idle fabric")

hw = HardwareModel()
print(f"\nestimated compute phase per iteration: "
      f"{compute_phase_duration(job, hw):.1f} s "
      f"({hw.tokens_per_batch:.0e} tokens, {hw.utilization:.0%} of "
      f"{hw.peak_flops / 1e12:.0f} TFLOPS per GPU)")

total = sum(c.volume for ring in rings for c in ring_allreduce_commodities(ring, 0))
print(f"total bytes on the wire per iteration: {total / 1e12:.2f} TB")
