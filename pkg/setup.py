#!/usr/bin/env python

"""The setup script."""

from os.path import exists

from setuptools import find_packages, setup

with open('requirements.txt') as f:
    install_requires = f.read().strip().split('\n')

if exists('README.md'):
    with open('README.md') as f:
        long_description = f.read()
else:
    long_description = ''

CLASSIFIERS = [
    'Development Status :: 3 - Alpha',
    'License :: OSI Approved :: MIT License',
    'Operating System :: OS Independent',
    'Intended Audience :: Science/Research',
    'Programming Language :: Python',
    'Programming Language :: Python :: 3',
    'Programming Language :: Python :: 3.9',
    'Programming Language :: Python :: 3.10',
    'Programming Language :: Python :: 3.11',
    'Topic :: Scientific/Engineering',
    'Topic :: Security',
]

setup(
    name='thermaltap',
    description='Thermal side-channel fingerprinting of VR applications from radiometric frames',
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires='>=3.9',
    classifiers=CLASSIFIERS,
    packages=find_packages(exclude=('tests',)),
    package_dir={'thermaltap': 'thermaltap'},
    include_package_data=True,
    install_requires=install_requires,
    license='MIT',
    zip_safe=False,
    keywords=['thermal imaging', 'side channel', 'virtual reality', 'xarray'],
    entry_points={'console_scripts': ['thermaltap=thermaltap.cli:main']},
    use_scm_version={
        'version_scheme': 'post-release',
        'local_scheme': 'dirty-tag',
        'fallback_version': '0.1.0',
    },
    setup_requires=['setuptools_scm', 'setuptools>=30.3.0'],
)
