"""setuptools shim for editable installs, metadata lives in setup.cfg"""
from setuptools import setup

if __name__ == "__main__":
    setup()
