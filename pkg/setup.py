#!/usr/bin/env python
# encoding: utf-8
# python3 setup.py sdist bdist_wheel
from setuptools import setup

setup(
    name="unigap",
    version='0.1.0',
    description='adaptive training distributions that equalize denoiser gaps across noise specifications',
    author='unigap developers',
    packages=['unigap'],
    license="LGPLv3",
    long_description=open('readme.md').read(),
    long_description_content_type='text/markdown',
    python_requires='>=3.8',
    install_requires=['numpy>=1.17'],
    extras_require={
        'images': ['Pillow'],
    },
    entry_points={
        'console_scripts': ['unigap = unigap.cli:main'],
    },
    classifiers=[
        "Intended Audience :: Science/Research",
        "Development Status :: 3 - Alpha",
        "License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Image Processing",
    ]
)
