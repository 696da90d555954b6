#include "safer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace safer::stats {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gauss-Legendre half-rule points, selected by |rho| band (6/12/20 nodes).
constexpr double kW6[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr double kX6[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};

constexpr double kW12[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                            0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
constexpr double kX12[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                            0.5873179542866171, 0.3678314989981802, 0.1252334085114692};

constexpr double kW20[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                             0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                             0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                             0.1527533871307259};
constexpr double kX20[10] = {0.9931285991850949,  0.9639719272779138, 0.9122344282513259,
                             0.8391169718222188,  0.7463319064601508, 0.6360536807265150,
                             0.5108670019508271,  0.3737060887154196, 0.2277858511416451,
                             0.07652652113349733};

double phid(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper-orthant probability P(X > dh, Y > dk) for correlation r, |r| < 1.
// Drezner-Wesolowsky with Genz's tail transformation for |r| near 1.
double bvnd(double dh, double dk, double r) {
    const double* w;
    const double* x;
    int lg;
    const double ar = std::fabs(r);
    if (ar < 0.3) {
        w = kW6, x = kX6, lg = 3;
    } else if (ar < 0.75) {
        w = kW12, x = kX12, lg = 6;
    } else {
        w = kW20, x = kX20, lg = 10;
    }

    double h = dh, k = dk;
    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        if (ar > 0.0) {
            const double hs = (h * h + k * k) / 2.0;
            const double asr = std::asin(r);
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
                    bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn = bvn * asr / (2.0 * kTwoPi);
        }
        bvn += phid(-h) * phid(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        {
            const double as = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 16.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0)
                bvn = a * std::exp(asr) *
                      (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
            if (-hk < 100.0) {
                const double b = std::sqrt(bs);
                bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * phid(-b / a) * b *
                       (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double xs = (a * (is * x[i] + 1.0)) * (a * (is * x[i] + 1.0));
                    const double rs = std::sqrt(1.0 - xs);
                    asr = -(bs / xs + hk) / 2.0;
                    if (asr > -100.0)
                        bvn += a * w[i] * std::exp(asr) *
                               (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                                (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
            bvn = -bvn / kTwoPi;
        }
        if (r > 0.0) {
            bvn += phid(-std::max(h, k));
        } else {
            bvn = -bvn;
            if (k > h) bvn += phid(k) - phid(h);
        }
    }
    return bvn;
}

}  // namespace

double normal_cdf(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("normal_cdf: non-finite input");
    return phid(x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must be in (0,1)");

    // Acklam's rational approximation, then one Halley step against erfc.
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double z;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = phid(z) - p;
    const double u = e * std::sqrt(kTwoPi) * std::exp(0.5 * z * z);
    z -= u / (1.0 + 0.5 * z * u);
    return z;
}

double bivariate_normal_cdf(double a, double b, double rho) {
    if (std::isnan(a) || std::isnan(b) || !std::isfinite(rho))
        throw std::invalid_argument("bivariate_normal_cdf: non-finite input");
    if (!(std::fabs(rho) < 1.0))
        throw std::invalid_argument("bivariate_normal_cdf: |rho| must be < 1");

    constexpr double inf = std::numeric_limits<double>::infinity();
    if (a == -inf || b == -inf) return 0.0;
    if (a == inf && b == inf) return 1.0;
    if (a == inf) return phid(b);
    if (b == inf) return phid(a);

    // P(X <= a, Y <= b) = P(-X > -a, -Y > -b); negating both keeps rho.
    return bvnd(-a, -b, rho);
}

}  // namespace safer::stats
