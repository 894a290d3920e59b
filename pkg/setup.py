from setuptools import setup, find_packages # type: ignore
import os
from cocyclerigidity.version import VERSION

def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()

install_requires = [
    'numpy',
    'scipy',
    'pandas',
    'networkx',
    'toml',
    'loguru',
]

setup(
    name='cocyclerigidity',
    version=VERSION,
    packages=find_packages(),
    install_requires=install_requires,
    extras_require={
        'test': ['pytest'],
    },
    description='Matrix cocycles over subshifts of finite type: fiber bunching, holonomies, '
                'invariant conformal structures and shadowing experiments',
    long_description=read('README.md'),
    long_description_content_type='text/markdown',
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.10',
    entry_points={
        'console_scripts': [
            'cocycle=cocyclerigidity.cli.run_experiment:main',
        ],
    },
    include_package_data=True,
    package_data={
        'cocyclerigidity': ['configs/*.toml'],
    },
)
