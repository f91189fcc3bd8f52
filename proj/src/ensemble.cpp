#include "semm/ensemble.hpp"

#include "rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace semm {

std::string_view to_string(MaterialMode mode) {
  switch (mode) {
    case MaterialMode::single_crystal: return "single_crystal";
    case MaterialMode::ceramic: return "ceramic";
    case MaterialMode::powder: return "powder";
  }
  return "unknown";
}

MaterialMode parse_mode(std::string_view text) {
  if (text == "single_crystal" || text == "single-crystal" || text == "crystal")
    return MaterialMode::single_crystal;
  if (text == "ceramic") return MaterialMode::ceramic;
  if (text == "powder") return MaterialMode::powder;
  throw ValidationError("unknown material mode '" + std::string(text) + "'");
}

void EnsembleConfig::validate() const {
  if (n_ions == 0) throw ValidationError("n_ions must be >= 1");
  if (!(t2 > 0.0)) throw ValidationError("t2 must be > 0");
  if (!(detuning_window > 0.0)) throw ValidationError("detuning_window must be > 0");
  if (!(k_mean > 0.0)) throw ValidationError("k_mean must be > 0");
  if (!(k_spread >= 0.0)) throw ValidationError("k_spread must be >= 0");
  if (!(field_hwhm >= 0.0)) throw ValidationError("field_hwhm must be >= 0");
  if (!(field_scale_hwhm >= 0.0)) throw ValidationError("field_scale_hwhm must be >= 0");
  if (orientation_strata < 1) throw ValidationError("orientation_strata must be >= 1");
  if (!is_unit(field_direction)) throw ValidationError("field_direction must be a unit vector");
  if (!is_unit(light_polarization))
    throw ValidationError("light_polarization must be a unit vector");
}

namespace {

Vec3 direction_from(double cos_theta, double azimuth, const Vec3& pole, const Vec3& e1,
                    const Vec3& e2) {
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  Vec3 a = cos_theta * pole + sin_theta * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2);
  return a.normalized();
}

}  // namespace

Ensemble sample_ensemble(const EnsembleConfig& config) {
  config.validate();

  detail::Rng rng(config.seed);
  const Vec3 pole = config.field_direction.normalized();
  const Vec3 e1 = pole.unitOrthogonal();
  const Vec3 e2 = pole.cross(e1);

  const std::size_t n_pairs = (config.n_ions + 1) / 2;
  const auto strata = static_cast<std::size_t>(config.orientation_strata);

  Ensemble ions;
  ions.reserve(config.n_ions);
  std::vector<std::size_t> azimuth_slot;

  const std::size_t n_blocks = (n_pairs + strata - 1) / strata;
  for (std::size_t block = 0; block < n_pairs; block += strata) {
    const std::size_t size = std::min(strata, n_pairs - block);
    const double slot = static_cast<double>(block / strata) + rng.uniform01();
    const double detuning =
        config.detuning_window * (2.0 * slot / static_cast<double>(n_blocks) - 1.0);

    azimuth_slot.resize(size);
    std::iota(azimuth_slot.begin(), azimuth_slot.end(), std::size_t{0});
    rng.shuffle(azimuth_slot);

    for (std::size_t j = 0; j < size; ++j) {
      IonParams ion;
      ion.detuning = detuning;

      if (config.mode == MaterialMode::single_crystal) {
        ion.axis = pole;
      } else if (size == 1) {
        const double u = rng.uniform(-1.0, 1.0);
        ion.axis = direction_from(u, rng.uniform(0.0, kTwoPi), pole, e1, e2);
      } else {
        const double n = static_cast<double>(size);
        const double u = -1.0 + 2.0 * (static_cast<double>(j) + rng.uniform01()) / n;
        const double phi =
            kTwoPi * (static_cast<double>(azimuth_slot[j]) + rng.uniform01()) / n;
        ion.axis = direction_from(u, phi, pole, e1, e2);
      }

      ion.stark_k = config.k_mean;
      if (config.k_spread > 0.0) {
        do {
          ion.stark_k = config.k_mean * (1.0 + config.k_spread * rng.normal());
        } while (!(ion.stark_k > 0.0));
      }

      if (config.field_scale_hwhm > 0.0) {
        do {
          ion.field_scale = 1.0 + config.field_scale_hwhm * rng.cauchy();
        } while (!(ion.field_scale > 0.05));
      }

      if (config.field_hwhm > 0.0) {
        // Isotropic multivariate Cauchy: its projection on any unit vector is
        // Cauchy(0, field_hwhm).
        const Vec3 z(rng.normal(), rng.normal(), rng.normal());
        const double w = std::abs(rng.normal());
        ion.field_offset = config.field_hwhm * z / std::max(w, 1e-300);
      }

      switch (config.mode) {
        case MaterialMode::ceramic:
          ion.coupling = std::min(1.0, std::abs(ion.axis.dot(config.light_polarization)));
          break;
        case MaterialMode::single_crystal:
        case MaterialMode::powder:
          ion.coupling = 1.0;
          break;
      }

      ions.push_back(ion);
      if (ions.size() < config.n_ions) {
        IonParams partner = ion;
        partner.axis = -ion.axis;
        ions.push_back(partner);
      }
    }
  }
  return ions;
}

std::uint64_t config_hash(const EnsembleConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix_bytes = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  auto mix = [&](auto value) { mix_bytes(&value, sizeof(value)); };
  mix(static_cast<std::uint64_t>(config.n_ions));
  mix(config.seed);
  mix(static_cast<int>(config.mode));
  mix(config.detuning_window);
  mix(config.k_mean);
  mix(config.k_spread);
  mix(config.field_hwhm);
  mix(config.field_scale_hwhm);
  mix(config.t2);
  for (int i = 0; i < 3; ++i) mix(config.field_direction[i]);
  for (int i = 0; i < 3; ++i) mix(config.light_polarization[i]);
  mix(config.orientation_strata);
  return h;
}

}  // namespace semm
