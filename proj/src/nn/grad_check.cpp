#include "aoba/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace aoba::nn {

double relative_error(double analytic, double numeric) {
	const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
	return std::abs(analytic - numeric) / denom;
}

double grad_check(const std::function<double(std::span<const double>)> &loss, std::span<const double> theta,
                  std::span<const double> analytic, double eps) {
	if (!(eps > 0.0)) {
		throw std::invalid_argument("grad_check: eps must be > 0");
	}
	if (theta.size() != analytic.size()) {
		throw std::invalid_argument("grad_check: gradient size mismatch");
	}
	std::vector<double> probe(theta.begin(), theta.end());
	double worst = 0.0;
	for (std::size_t i = 0; i < probe.size(); ++i) {
		const double saved = probe[i];
		probe[i] = saved + eps;
		const double up = loss(probe);
		probe[i] = saved - eps;
		const double down = loss(probe);
		probe[i] = saved;
		worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
	}
	return worst;
}

double grad_check(const std::function<double()> &loss, const ParamList &params, double eps) {
	if (!(eps > 0.0)) {
		throw std::invalid_argument("grad_check: eps must be > 0");
	}
	double worst = 0.0;
	for (Param *p : params) {
		for (std::size_t i = 0; i < p->value.size(); ++i) {
			const double saved = p->value[i];
			p->value[i] = saved + eps;
			const double up = loss();
			p->value[i] = saved - eps;
			const double down = loss();
			p->value[i] = saved;
			worst = std::max(worst, relative_error(p->grad[i], (up - down) / (2.0 * eps)));
		}
	}
	return worst;
}

} // namespace aoba::nn
