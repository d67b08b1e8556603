from setuptools import setup, find_packages

import runpy

version = runpy.run_path('casasid/version.py')

setup(
    name='casasid',
    version=version['version'],
    description='Speaker identification under interference with CASA, '
                'MFCC features and a GMM-CNN cascade',
    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    classifiers=[
        "License :: OSI Approved :: ISC License (ISCL)",
        "Programming Language :: Python",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Multimedia :: Sound/Audio :: Speech",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    keywords='audio speech speaker identification casa mfcc gmm cnn',
    license='ISC',
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.7',
        'librosa>=0.10',
        'soundfile>=0.10',
        'jsonpickle',
        'pandas',
        'scikit-learn>=1.0',
        'joblib',
    ],
    entry_points={
        'console_scripts': ['casasid=casasid.cli:main'],
    },
    extras_require={
        'docs': ['numpydoc', 'sphinx'],
        'tests': ['pytest', 'pytest-cov'],
    }
)
