"""Many small loads on a 1000-bus radial feeder give a near-Gaussian CoI;
one dominant load breaks the Lindeberg balance and fattens the tails.

Takes about half a minute. Run: python3 notebooks/06_clt_breakdown.py
"""
from freqflux import SubnetSpec, aggregation_experiment, ieee14

res = aggregation_experiment(ieee14(), SubnetSpec())
for name, rep, lind in (("uniform", res.uniform, res.lindeberg_uniform), ("dominant", res.dominant, res.lindeberg_dominant)):
    print(
        f"{name:9s} Lindeberg ratio {lind.ratio:.4f} ({'pass' if lind.passed else 'fail'})  "
        f"skew {rep.skewness:+.3f}  excess kurtosis {rep.excess_kurtosis:+.3f}  JB p {rep.jb_pvalue:.3g}"
    )
print(f"finished in {res.seconds:.1f} s")
