"""
Quick setup verification script.
Run this to check that dependencies are installed and the output root is usable.
"""

import os
import sys
from pathlib import Path

from dotenv import load_dotenv


def check_env_vars():
    """Report the toolkit's environment variables; all of them are optional."""
    load_dotenv()

    optional_vars = {
        "COLLISION_TOOLKIT_OUTPUT_ROOT": "Output root for run directories (default: runs)",
        "COLLISION_TOOLKIT_LOG_LEVEL": "CLI log level (default: INFO)",
        "COLLISION_TOOLKIT_REANNOTATION_DIR": "Released re-annotation files for data-conditional checks",
    }

    print("=" * 60)
    print("Environment Variables")
    print("=" * 60)
    print()

    for var_name, description in optional_vars.items():
        value = os.getenv(var_name)
        if value:
            print(f"✓ {var_name}: {value}")
        else:
            print(f"- {var_name}: not set ({description})")

    print()
    return True


def check_dependencies():
    """Check if all required Python packages are installed."""
    print("=" * 60)
    print("Dependencies Check")
    print("=" * 60)
    print()

    required_packages = {
        "numpy": "NumPy",
        "scipy": "SciPy",
        "pandas": "Pandas",
        "shapely": "Shapely",
        "dotenv": "python-dotenv",
        "streamlit": "Streamlit",
        "pytest": "pytest",
    }

    all_installed = True
    for package, name in required_packages.items():
        try:
            __import__(package)
            print(f"✓ {name}: Installed")
        except ImportError:
            print(f"✗ {name}: NOT INSTALLED")
            all_installed = False

    print()
    return all_installed


def check_output_root():
    """Check that the output root can be created and written."""
    print("=" * 60)
    print("Output Root Check")
    print("=" * 60)
    print()

    try:
        from src.config import output_root

        root = output_root()
        root.mkdir(parents=True, exist_ok=True)
        probe = Path(root) / ".write_check"
        probe.write_text("ok", encoding="utf-8")
        probe.unlink()
        print(f"✓ Output root writable: {root}")
        return True
    except Exception as e:
        print(f"✗ Output root not usable: {e}")
        return False


def main():
    """Run all checks."""
    print("\n" + "=" * 60)
    print("Collision Toolkit - Setup Verification")
    print("=" * 60 + "\n")

    check_env_vars()
    deps_ok = check_dependencies()

    if not deps_ok:
        print("=" * 60)
        print("SETUP INCOMPLETE")
        print("=" * 60)
        print("\nTo install missing dependencies:")
        print("  pip install -r requirements.txt")
        sys.exit(1)

    root_ok = check_output_root()

    print()
    print("=" * 60)
    if root_ok:
        print("✓ ALL CHECKS PASSED!")
        print("=" * 60)
        print("\nNext steps:")
        print("  python -m src.cli --help")
        print("  pytest")
        print("  streamlit run app.py")
    else:
        print("⚠ SOME CHECKS FAILED")
        print("=" * 60)
        print("\nSet COLLISION_TOOLKIT_OUTPUT_ROOT to a writable directory.")
        sys.exit(1)

    print()


if __name__ == "__main__":
    main()
