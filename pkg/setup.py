import os

from setuptools import setup, find_packages


def readfile(fname):
    path = os.path.join(os.path.dirname(__file__), fname)
    return open(path).read()


setup(
    name="sdlab",
    version="0.1.0",
    description="Stokes-Dirac structures and their gauge reduction on periodic grids, with executable checks and simulations",
    long_description=readfile("README.rst"),
    long_description_content_type="text/x-rst",
    classifiers=[
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU Lesser General Public License v3 or later (LGPLv3+)",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Development Status :: 3 - Alpha",
    ],
    keywords=[
        "port-Hamiltonian systems",
        "Dirac structures",
        "discrete exterior calculus",
        "Lie-Poisson reduction",
        "structure-preserving integration",
    ],
    packages=find_packages(exclude=["tests"]),
    install_requires=["numpy>=1.17", "scipy>=1.4"],
    tests_require=["pytest", "hypothesis"],
    extras_require={"test": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["sdlab=sdlab.cli:main"]},
    python_requires=">=3.8",
)
