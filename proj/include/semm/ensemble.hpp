#ifndef SEMM_ENSEMBLE_HPP
#define SEMM_ENSEMBLE_HPP

#include "semm/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace semm {

enum class MaterialMode { single_crystal, ceramic, powder };

std::string_view to_string(MaterialMode mode);
MaterialMode parse_mode(std::string_view text);

/// One member of the inhomogeneous ensemble.
struct IonParams {
  double detuning = 0.0;     ///< MHz, from the laser reference
  Vec3 axis = Vec3::UnitZ(); ///< C2 axis (permanent-dipole difference and transition dipole)
  double stark_k = 0.0495;   ///< MHz/(V/cm)
  double field_scale = 1.0;  ///< multiplies the applied field amplitude
  Vec3 field_offset = Vec3::Zero();  ///< local-field perturbation, in units of the applied field
  double coupling = 1.0;     ///< optical coupling in [0, 1]
};

struct EnsembleConfig {
  std::size_t n_ions = 10000;
  std::uint64_t seed = 1;
  MaterialMode mode = MaterialMode::powder;
  double detuning_window = 10.0;  ///< half-width of the uniform detuning window, MHz
  double k_mean = 0.0495;
  double k_spread = 0.0;          ///< relative Gaussian spread of k
  double field_hwhm = 0.0;        ///< isotropic Cauchy local-field perturbation scale
  double field_scale_hwhm = 0.0;  ///< Lorentzian spread of the scalar field factor
  double t2 = 5.7;                ///< optical coherence lifetime, µs
  Vec3 field_direction = Vec3::UnitZ();
  Vec3 light_polarization = Vec3::UnitX();
  /// Number of cos(theta) strata per detuning group; 1 means i.i.d. orientations.
  int orientation_strata = 16;

  void validate() const;
};

using Ensemble = std::vector<IonParams>;

/// Deterministic in (config, seed). Ions come in inversion pairs (a, -a) that
/// share detuning, Stark coefficient and local field. Pairs are grouped in
/// blocks of orientation_strata sharing one detuning; block detunings are
/// stratified over the window (one jittered draw per equal-width slot).
Ensemble sample_ensemble(const EnsembleConfig& config);

/// cos(theta) between the ion axis and the field direction.
inline double stark_projection(const IonParams& ion, const Vec3& field_direction) {
  return ion.axis.dot(field_direction);
}

/// Projection of the local field (in units of the applied amplitude) on the
/// ion axis: field_scale * cos(theta) + axis . field_offset.
inline double local_field_projection(const IonParams& ion, const Vec3& field_direction) {
  return ion.field_scale * ion.axis.dot(field_direction) + ion.axis.dot(ion.field_offset);
}

/// Stable 64-bit digest of every config field; used in output metadata.
std::uint64_t config_hash(const EnsembleConfig& config);

}  // namespace semm

#endif  // SEMM_ENSEMBLE_HPP
