"""
Setup configuration for ns3l_lab.

Installs the negative-sampling semi-supervised learning laboratory and its
``ns3l-lab`` command.
"""
from setuptools import find_packages, setup


with open('requirements/base.txt') as f:
    install_requires = [
        line.strip() for line in f
        if line.strip() and not line.strip().startswith(('#', '-'))
    ]

setup(
    name='ns3l_lab',
    version='0.1.0',
    packages=find_packages(exclude=('tests', 'tests.*', 'examples', 'examples.*')),
    install_requires=install_requires,
    python_requires='>=3.9',
)
