from ._wac import *  # noqa: F401,F403
from ._wac import __doc__, Backend, GenConfig, generate_dataset, split_dataset, train_model


def quick_model(n_scenes=200, backend=Backend.LogReg, seed=1):
    """Generate a synthetic corpus and fit a model on its train split."""
    cfg = GenConfig()
    cfg.n_scenes = n_scenes
    cfg.seed = seed
    train, _, test = split_dataset(generate_dataset(cfg), 0.8, 0.0)
    return train_model(train, backend), test
