#!/usr/bin/env python3
"""
Setup script for CESTRADE.

Run without arguments it prepares a development environment: checks the
Python version, creates a virtual environment, installs the dependencies and
checks the imports. With setuptools commands (install, develop, egg_info,
bdist_wheel, ...) it packages the library.
"""

import os
import platform
import subprocess
import sys
from pathlib import Path

REQUIRED_PYTHON = (3, 8)


def read_requirements():
    """Runtime requirements from requirements.txt, without the test tools."""
    path = Path(__file__).with_name("requirements.txt")
    if not path.exists():
        return []
    requirements = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line and not line.startswith("pytest"):
            requirements.append(line)
    return requirements


def run_command(cmd, check=True, shell=False):
    """Run a command and return the result."""
    try:
        result = subprocess.run(
            cmd, check=check, capture_output=True, text=True, shell=shell
        )
        return result.returncode == 0, result.stdout, result.stderr
    except subprocess.CalledProcessError as e:
        return False, e.stdout, e.stderr
    except FileNotFoundError:
        return (
            False,
            "",
            f"Command not found: {cmd[0] if isinstance(cmd, list) else cmd}",
        )


def check_python_version():
    """Check if Python version is compatible."""
    if sys.version_info < REQUIRED_PYTHON:
        print("Python 3.8+ is required. Current version:", sys.version)
        return False
    print(f"Python version: {sys.version}")
    return True


def setup_virtual_environment():
    """Set up virtual environment if needed."""
    venv_path = Path("venv")

    if venv_path.exists():
        print("Virtual environment already exists")
        return True

    print("Creating virtual environment...")
    success, stdout, stderr = run_command([sys.executable, "-m", "venv", "venv"])

    if not success:
        print(f"Failed to create virtual environment: {stderr}")
        return False

    print("Virtual environment created")
    return True


def install_python_dependencies():
    """Install Python dependencies."""
    print("\nInstalling Python dependencies...")

    pip_cmd = None
    if os.path.exists("venv"):
        if platform.system() == "Windows":
            pip_cmd = ["venv\\Scripts\\pip.exe"]
        else:
            pip_cmd = ["venv/bin/pip"]

    # Fall back to the running interpreter's pip
    if not pip_cmd or not os.path.exists(pip_cmd[0]):
        pip_cmd = [sys.executable, "-m", "pip"]

    install_cmd = pip_cmd + ["install", "-r", "requirements.txt"]
    print(f"Running: {' '.join(install_cmd)}")
    success, stdout, stderr = run_command(install_cmd)

    if not success:
        print(f"Failed to install dependencies: {stderr}")
        print("\nManual installation:")
        print("1. Create virtual environment: python3 -m venv venv")
        print("2. Activate it: source venv/bin/activate")
        print("3. Install deps: pip install -r requirements.txt")
        return False

    print("Dependencies installed successfully")
    return True


def test_imports():
    """Test that all critical imports work."""
    print("\nTesting imports...")

    test_modules = [
        ("numpy", "array computing"),
        ("pandas", "CSV artifacts"),
        ("yaml", "scenario files"),
        ("CESTRADE.cli", "command-line tool"),
    ]

    all_good = True
    for module, description in test_modules:
        try:
            __import__(module)
            print(f"ok      {module} - {description}")
        except ImportError as e:
            print(f"missing {module} - {description}: {e}")
            all_good = False

    return all_good


def main():
    """Main setup routine."""
    print("CESTRADE setup")
    print("=" * 40)

    if not check_python_version():
        sys.exit(1)

    if not setup_virtual_environment():
        print("Continuing without virtual environment...")

    if not install_python_dependencies():
        print("\nSetup failed due to dependency installation issues.")
        sys.exit(1)

    if not test_imports():
        print("\nSome imports failed. The tool may not work correctly.")

    print("\nSetup completed.")
    print("\nTo run a study:")
    print("   ./run.sh run --out results")
    print("   python3 main.py compare --out results")
    print("\nLog files will be created in: ~/.cestrade/logs/")


def package():
    """Package the library with setuptools."""
    from setuptools import find_packages, setup

    setup(
        name="cestrade",
        version="1.0.0",
        description="Community energy storage trading simulator",
        packages=find_packages(exclude=("tests", "tests.*")),
        python_requires=">=3.8",
        install_requires=read_requirements(),
        entry_points={"console_scripts": ["cestrade=CESTRADE.cli:main"]},
    )


if __name__ == "__main__":
    if len(sys.argv) > 1:
        package()
    else:
        main()
