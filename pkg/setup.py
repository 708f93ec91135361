from setuptools import setup, find_packages

setup(
    name='gasphs',
    version='1.0.0',
    packages=find_packages(exclude=['tests', 'tests.*']),
    py_modules=['app', 'config', 'tasks'],
    include_package_data=True,
    install_requires=[
        'Flask',
        'numpy',
        'scipy>=1.9',
        'networkx',
        'pandas',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': [
            'gasphs=app:cli',
        ],
    },
)
