"""Train the desk-scale seam model on one synthetic box and sample it back.

A few hundred steps on a single shape are enough for the model to reproduce
its seam token by token. The script then decodes the generated stream, cuts
the mesh along it and reports the flattening quality.

Run with ``python3 demos/train_and_generate.py [steps]`` (about a minute for
the default 400 steps on one CPU core).
"""

import sys

import torch

from seamcut import apply_seams, unwrap_cut
from seamcut.neural import (GenerationConfig, ModelConfig, TrainConfig, generate, make_example,
                            make_synthetic_dataset, teacher_forced_accuracy, train)
from seamcut.sampling import sample_condition

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 400
torch.set_num_threads(1)

cfg = ModelConfig(point_budget=512)
shape = make_synthetic_dataset(1, seed=0)[0]
example = make_example(shape.mesh, shape.seam, cfg)
print(f"{shape.family}: {shape.mesh.n_vertices} vertices, {example.n_segments} seam segments, "
      f"{len(example.tokens)} tokens")

result = train([example], cfg, TrainConfig(steps=steps, batch_size=1, lr=1e-4, augment=False, log_every=0))
print(f"cross-entropy {result.history[0][1]:.3f} -> {result.history[-1][1]:.4f}, "
      f"teacher-forced accuracy {teacher_forced_accuracy(result.model, [example]):.3f}")

cloud = sample_condition(shape.mesh, cfg.point_budget)
gen = GenerationConfig(temperature=0.0, bucket=cfg.bucket_of(example.n_segments))
out = generate(result.model, cloud, gen, shape.mesh.n_vertices)
print(f"greedy sample: {out.seam.n_segments} segments, exact match = {out.tokens == example.tokens}")

cut = apply_seams(shape.mesh, out.seam)
atlas = unwrap_cut(cut.cut_mesh, cut.charts, strict=False)
print(f"cut into {len(cut.charts)} chart(s), mean conformal energy {atlas.mean_energy:.4f}")
