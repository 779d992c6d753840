"""
Setup script for the time-series transfer-learning workbench
"""
from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="tsft-workbench",
    version="1.0.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Pre-train, rank and fine-tune time-series Transformers across domains with one-step source mixing",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/tsft-workbench",
    py_modules=[
        "dataseries",
        "demo",
        "domaindist",
        "errors",
        "evalkit",
        "experiment",
        "gradflow",
        "main",
        "models",
        "trainloop",
        "tsformer",
    ],
    packages=["config"],
    package_data={"config": ["*.json", "env.example"]},
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "tsft=main:main",
        ],
    },
    include_package_data=True,
    zip_safe=False,
)
