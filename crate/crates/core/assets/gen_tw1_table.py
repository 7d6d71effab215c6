# Hastings-McLeod Painleve II integration -> TW1 CDF grid.
import mpmath as mp
mp.mp.dps = 60
s0 = mp.mpf(10)
ai = lambda x: mp.airyai(x)
q0 = ai(s0); dq0 = mp.airyai(s0, derivative=1)
u0 = mp.quad(lambda x: ai(x)**2, [s0, mp.inf])
v0 = mp.quad(lambda x: (x - s0) * ai(x)**2, [s0, mp.inf])
w0 = mp.quad(ai, [s0, mp.inf])
# y = [q, q', u, v, w]; u=int_s^inf q^2, v=int_s^inf u, w=int_s^inf q
# integrate in t = -s, since odefun only steps forward
def f(t, y):
    s = -t
    q, dq, u, v, w = y
    return [-dq, -(s*q + 2*q**3), q**2, u, q]
_sol = mp.odefun(f, -s0, [q0, dq0, u0, v0, w0], tol=mp.mpf(10)**-40, degree=40)
sol = lambda s: _sol(-s)
import sys
step = mp.mpf('0.02')
out = []
k = 0
s = mp.mpf(6)
while s >= -10 - 1e-9:
    q, dq, u, v, w = sol(s)
    logF = -(v + w) / 2
    out.append((s, mp.e**logF))
    k += 1
    s = mp.mpf(6) - k * step
out.reverse()
with open(sys.argv[1], 'w') as fh:
    fh.write("# Tracy-Widom beta=1 cumulative distribution function F1(s)\n")
    fh.write("# Hastings-McLeod Painleve II solution, 60-digit Taylor integration\n")
    fh.write("# columns: s F1(s)\n")
    for s, F in out:
        fh.write("%s %s\n" % ("%.2f" % float(s), mp.nstr(F, 17)))
