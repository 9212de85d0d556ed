import factory
import numpy as np
from factory import Faker

from .core import Hypercube, Layer, Network


def _rng() -> np.random.Generator:
    # follows factory_boy's seed, so reseed_random() pins the weights too
    return np.random.default_rng(factory.random.randgen.getrandbits(32))


def random_layers(input_dim: int, depth: int, width: int, output_dim: int, scale: float = 1.0) -> list[Layer]:
    rng = _rng()
    dims = [input_dim] + [width] * (depth - 1) + [output_dim]
    return [
        Layer(scale * rng.standard_normal((dims[k + 1], dims[k])), scale * rng.standard_normal(dims[k + 1]))
        for k in range(depth)
    ]


class NetworkFactory(factory.Factory):
    """Dense network with Gaussian weights; the architecture comes from Faker."""

    class Meta:
        model = Network

    class Params:
        input_dim = Faker("pyint", min_value=1, max_value=4)
        depth = Faker("pyint", min_value=1, max_value=4)
        width = Faker("pyint", min_value=1, max_value=6)
        output_dim = Faker("pyint", min_value=1, max_value=3)
        scale = 1.0

    layers = factory.LazyAttribute(
        lambda o: random_layers(o.input_dim, o.depth, o.width, o.output_dim, o.scale)
    )


class HypercubeFactory(factory.Factory):
    class Meta:
        model = Hypercube

    class Params:
        length = Faker("pyfloat", min_value=0.25, max_value=2.0)

    lower = Faker("pyfloat", min_value=-2.0, max_value=1.0)
    upper = factory.LazyAttribute(lambda o: o.lower + o.length)
    dim = Faker("pyint", min_value=1, max_value=3)
