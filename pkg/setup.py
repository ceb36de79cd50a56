from setuptools import setup, find_packages

setup(
    name="pinc_rov",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    py_modules=["main", "config"],
    package_data={"dynamics": ["*.toml"]},
    install_requires=[
        "torch",
        "pandas",
        "numpy",
        "sqlalchemy",
        "python-dotenv",
        "matplotlib",
        "seaborn",
        "tomli; python_version < '3.11'",
    ],
    extras_require={"test": ["pytest", "sympy"]},
    entry_points={"console_scripts": ["pinc=main:main"]},
    description="Physics-informed neural network with control surrogate models for a 4-DOF underwater vehicle",
    keywords="physics-informed neural networks, underwater vehicle, system identification, surrogate model",
    python_requires=">=3.10",
)
