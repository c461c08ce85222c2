from setuptools import setup


setup(
    name="fftconv",
    version="0.1.0",
    description="FFT-based training of convolutional layers with a direct reference, a cost model and benchmarks",
    author="Tobias Stenzel",
    author_email="tobias.stenzel@mailbox.org",
    packages=["fftconv"],
    install_requires=["numpy"],
    entry_points={"console_scripts": ["fftconv=fftconv.bench:main"]},
    license="",
)
