#!/usr/bin/env python
"""The setup script."""

from setuptools import setup, find_packages

requirements = [
    'numpy>=1.21',
    'pandas>=1.5',
    'scipy>=1.7',
    'tqdm>=4.62',
]

test_requirements = [
    'pytest>=6',
]

setup(
    author="Or Shem Tov",
    author_email='or@quaniful.com',
    python_requires='>=3.8',
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    description=
    "Group-aware search success metrics for static and stochastic rankings.",
    entry_points={
        'console_scripts': ['gass=gass.cli:main'],
    },
    install_requires=requirements,
    extras_require={'test': test_requirements},
    license="MIT license",
    long_description=None,
    include_package_data=True,
    package_data={'utils': ['columns.json']},
    keywords='gass',
    name='gass',
    packages=find_packages(include=['gass', 'gass.*', 'utils']),
    test_suite='tests',
    tests_require=test_requirements,
    version='0.1.0',
    zip_safe=False,
)
