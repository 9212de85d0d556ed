import factory.random
import pytest


@pytest.fixture(autouse=True)
def reseed_factories():
    """Pin factory_boy/Faker randomness so every test sees the same random networks."""
    factory.random.reseed_random(42)
