from setuptools import setup, find_packages
import re

version = ''
with open('mckgpy/__init__.py') as f:
    version = re.search(r'^__version__\s*=\s*[\'"]([^\'"]*)[\'"]', f.read(), re.MULTILINE).group(1)

if not version:
    raise RuntimeError('version is not set')

readme = ''
with open('README.rst') as f:
    readme = f.read()


setup(name='mckgpy',
      author='mckgpy developers',
      version=version,
      packages=find_packages(exclude=["docs", "tests"]),
      license='BSD 3-Clause',
      description='Mixed-curvature knowledge graph recommendation on kappa-stereographic product spaces.',
      long_description=readme,
      include_package_data=True,
      install_requires=['numpy>=1.17'],
      entry_points={
          'console_scripts': ['mckgpy=mckgpy.cli:main'],
      },
      test_suite='tests',
      classifiers=[
          'Development Status :: 3 - Alpha',
          'License :: OSI Approved :: BSD License',
          'Intended Audience :: Science/Research',
          'Natural Language :: English',
          'Operating System :: OS Independent',
          'Programming Language :: Python :: 3',
          'Programming Language :: Python :: 3.6',
          'Programming Language :: Python :: 3.7',
          'Topic :: Scientific/Engineering :: Artificial Intelligence',
      ]
      )
