from setuptools import find_packages, setup

setup(
    name="tactire",
    packages=find_packages(include=["tactire", "tactire.*"]),
    install_requires=[
        "numpy",
        "jax",
        "flax",
        "optax",
        "ml_collections",
        "tqdm",
        "absl-py",
        "scipy",
        "scikit-learn",
        "wandb",
        "matplotlib",
    ],
)
