"""Print the baseline comparison table and the headline ratios.

    python scripts/baseline_comparison.py
"""

from drangesim.bench import compare_baselines


def main():
    print(compare_baselines().to_markdown())


if __name__ == "__main__":
    main()
