"""
Receptive fields of multi-scale networks
========================================

How far can one output pixel see?  Each branch ``b`` of a UNet or MSNet
works on an image downsampled by ``2**b``, so a 3x3 convolution there
covers ``2**b`` times more input.  The closed-form count is checked here
against a probe that backpropagates a unit impulse from the centre pixel.
"""

import torch

from plasmapoisson.net import (NetConfig, Network, effective_receptive_field, empirical_rf, formula_is_exact,
                               optimal_params, receptive_field)

torch.set_num_threads(1)

print("arch   depths           formula  probe  exact")
for arch, depths in [("unet", (2, 1, 1, 1)), ("unet", (4, 2, 3)), ("unet", (2, 2, 2, 7)),
                     ("msnet", (2, 3, 1)), ("msnet", (4, 2, 1, 2)), ("msnet", (2, 1, 3, 1, 1))]:
    config = NetConfig(arch, depths, channels=(2,) * len(depths))
    rf, per_branch = receptive_field(config)
    probe = empirical_rf(Network(config))
    print(f"{arch:6s} {str(depths):16s} {rf:7d} {probe:6d}  {formula_is_exact(config)}   branches {per_branch}")

# A network should see the whole domain from any pixel: RF >= 2 n.
for n in (64, 101):
    rf, depth = optimal_params(n, 3)
    print(f"{n} nodes: target RF {rf}, smallest depth {depth}")

# Branches whose image is no larger than the kernel add less than their formula share.
for d5 in (1, 2, 3):
    depths = (2, 1, 1, 1, 1, d5)
    print(f"6-branch UNet, last branch depth {d5}: formula {receptive_field(depths, 3)[0]}, "
          f"effective on 101 nodes {effective_receptive_field(depths, 3, 101, total=100 * (d5 + 1))}")
