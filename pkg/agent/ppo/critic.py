import numpy as np
import torch
from torch import nn

from core.models.config import NetTopology


class CriticNet(nn.Module):
    """State-value estimate from the same flat observation the policy sees."""

    def __init__(self, topology: NetTopology, width: int = 64, n_layers: int = 2):
        super().__init__()
        layers: list[nn.Module] = []
        n_in = topology.observation_size
        for _ in range(n_layers):
            layers += [nn.Linear(n_in, width), nn.Tanh()]
            n_in = width
        layers.append(nn.Linear(n_in, 1))
        self.net = nn.Sequential(*layers)
        self.topology = topology
        self.double()

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.net(obs).squeeze(-1)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a numpy stream, for seeded runs."""
        with torch.no_grad():
            for module in self.net:
                if isinstance(module, nn.Linear):
                    bound = 1.0 / np.sqrt(module.in_features)
                    module.weight.copy_(
                        torch.from_numpy(rng.uniform(-bound, bound, size=tuple(module.weight.shape)))
                    )
                    module.bias.copy_(
                        torch.from_numpy(rng.uniform(-bound, bound, size=tuple(module.bias.shape)))
                    )

    def values(self, observations: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self(torch.as_tensor(observations, dtype=torch.float64)).numpy().copy()
