from setuptools import setup, find_packages
import pathlib

here = pathlib.Path(__file__).parent.resolve()

# Get the long description from the README file
long_description = (here / "README.rst").read_text(encoding="utf-8")
ROOT = "convexfm"


def rootify(packages):
    return [ROOT] + [
        f"{ROOT}.{package}"
        for package in packages
    ]


setup(
    name='convexfm',
    version='0.1-alpha1',
    description='Convex factorization machines fitted with a '
                'Frank-Wolfe (Hazan) solver.',
    long_description=long_description,
    packages=rootify(find_packages(ROOT)),  # same as name
    python_requires='>=3.10',
    install_requires=['numpy', 'scipy>=1.12'],
    extras_require={'test': ['pytest']},
    entry_points={
        'console_scripts': ['convexfm=convexfm.cli:main'],
    },
)
