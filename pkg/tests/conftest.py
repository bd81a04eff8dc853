import mpmath as mp

# Reference values in tests are built from irrational closed forms; give the
# whole test session enough working precision that test-side arithmetic never
# dominates the tolerance under check.
mp.mp.dps = 60
