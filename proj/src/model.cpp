#include "speclab/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace speclab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AsymmetricB: return "AsymmetricB";
    case ErrorCode::EntryOutOfRange: return "EntryOutOfRange";
    case ErrorCode::BadSimplexVector: return "BadSimplexVector";
    case ErrorCode::RankDeficiencyAmbiguous: return "RankDeficiencyAmbiguous";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::NotIndefiniteOrthogonal: return "NotIndefiniteOrthogonal";
    case ErrorCode::FormOutOfRange: return "FormOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::DegenerateGram: return "DegenerateGram";
    case ErrorCode::SingularDelta: return "SingularDelta";
    case ErrorCode::NotSimpleSpectrum: return "NotSimpleSpectrum";
    case ErrorCode::RequiresPositiveSemidefinite: return "RequiresPositiveSemidefinite";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::InternalMismatch: return "InternalMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AsymmetricB:
    case ErrorCode::EntryOutOfRange:
    case ErrorCode::BadSimplexVector:
    case ErrorCode::RankDeficiencyAmbiguous:
    case ErrorCode::InvalidModel:
    case ErrorCode::NotIndefiniteOrthogonal:
    case ErrorCode::FormOutOfRange:
    case ErrorCode::InvalidArgument:
    case ErrorCode::Parse:
    case ErrorCode::SingularDelta:
    case ErrorCode::NotSimpleSpectrum:
    case ErrorCode::RequiresPositiveSemidefinite:
      return true;
    default:
      return false;
  }
}

Eigen::VectorXd Signature::diagonal() const {
  Eigen::VectorXd diag(dim());
  diag.head(p).setOnes();
  diag.tail(q).setConstant(-1.0);
  return diag;
}

double indefinite_form(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, const Signature& sig) {
  return x.head(sig.p).dot(y.head(sig.p)) - x.tail(sig.q).dot(y.tail(sig.q));
}

double clamp_form(double value) {
  if (value >= 0.0 && value <= 1.0) return value;
  if (value >= -kFormTolerance && value < 0.0) return 0.0;
  if (value > 1.0 && value <= 1.0 + kFormTolerance) return 1.0;
  std::ostringstream msg;
  msg.precision(17);
  msg << "indefinite form " << value << " lies outside [0,1] beyond tolerance " << kFormTolerance;
  throw Error(ErrorCode::FormOutOfRange, msg.str());
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  if (v.size() == 0) return;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) v = -v;
}

namespace {

void check_simplex(const Eigen::VectorXd& w, const char* what) {
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (!(w[k] >= 0.0) || !std::isfinite(w[k])) {
      std::ostringstream msg;
      msg << what << "[" << k << "] = " << w[k] << " is negative or not finite";
      throw Error(ErrorCode::BadSimplexVector, msg.str());
    }
  }
  const double total = w.sum();
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " sums to " << total << ", expected 1";
    throw Error(ErrorCode::BadSimplexVector, msg.str());
  }
}

}  // namespace

LatentMixture::LatentMixture(std::vector<Atom> atoms, Signature signature)
    : atoms_(std::move(atoms)), signature_(signature) {
  if (signature_.p < 1 || signature_.q < 0) {
    throw Error(ErrorCode::InvalidModel, "signature requires p >= 1 and q >= 0");
  }
  if (atoms_.empty()) throw Error(ErrorCode::InvalidModel, "mixture has no atoms");
  const int d = signature_.dim();
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (atoms_[k].nu.size() != d) {
      std::ostringstream msg;
      msg << "atom " << k << " has dimension " << atoms_[k].nu.size() << ", signature needs " << d;
      throw Error(ErrorCode::InvalidModel, msg.str());
    }
    if (!atoms_[k].nu.allFinite()) {
      throw Error(ErrorCode::InvalidModel, "atom " + std::to_string(k) + " is not finite");
    }
  }
  check_simplex(weights(), "weight");

  const int K = size();
  forms_.resize(K, K);
  for (int j = 0; j < K; ++j) {
    for (int k = j; k < K; ++k) {
      const double raw = indefinite_form(atoms_[j].nu, atoms_[k].nu, signature_);
      try {
        forms_(j, k) = forms_(k, j) = clamp_form(raw);
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << "atoms (" << j << ", " << k << "): " << e.what();
        throw Error(ErrorCode::FormOutOfRange, msg.str());
      }
    }
  }
}

Eigen::MatrixXd LatentMixture::atom_matrix() const {
  Eigen::MatrixXd out(size(), dim());
  for (int k = 0; k < size(); ++k) out.row(k) = atoms_[k].nu.transpose();
  return out;
}

Eigen::VectorXd LatentMixture::weights() const {
  Eigen::VectorXd w(size());
  for (int k = 0; k < size(); ++k) w[k] = atoms_[k].weight;
  return w;
}

BlockModelParams validate_block_model(const BlockModelParams& params) {
  const auto K = params.B.rows();
  if (K < 1 || params.B.cols() != K) {
    throw Error(ErrorCode::InvalidModel, "B must be a non-empty square matrix");
  }
  if (params.pi.size() != K) {
    throw Error(ErrorCode::BadSimplexVector, "pi has length " + std::to_string(params.pi.size()) +
                                                 ", B is " + std::to_string(K) + "x" + std::to_string(K));
  }
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = 0; j < K; ++j) {
      const double b = params.B(i, j);
      if (!(b >= 0.0 && b <= 1.0)) {
        std::ostringstream msg;
        msg << "B(" << i << "," << j << ") = " << b << " outside [0,1]";
        throw Error(ErrorCode::EntryOutOfRange, msg.str());
      }
      if (j > i && b != params.B(j, i)) {
        std::ostringstream msg;
        msg << "B(" << i << "," << j << ") = " << b << " != B(" << j << "," << i
            << ") = " << params.B(j, i);
        throw Error(ErrorCode::AsymmetricB, msg.str());
      }
    }
  }
  check_simplex(params.pi, "pi");
  return params;
}

LatentMixture sbm_to_grdpg(const BlockModelParams& params, double rank_relative_tolerance) {
  validate_block_model(params);
  const auto K = params.B.rows();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(params.B);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  if (largest == 0.0) throw Error(ErrorCode::InvalidModel, "B is the zero matrix");
  const double cut = rank_relative_tolerance * largest;

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < K; ++i) {
    const double a = std::abs(values[i]);
    if (a > cut && a < 10.0 * cut) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "eigenvalue " << values[i] << " of B is within a decade of the rank cutoff " << cut;
      throw Error(ErrorCode::RankDeficiencyAmbiguous, msg.str());
    }
    if (a > cut) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end(),
            [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });

  Signature sig;
  sig.p = static_cast<int>(std::count_if(kept.begin(), kept.end(),
                                         [&](Eigen::Index i) { return values[i] > 0.0; }));
  sig.q = static_cast<int>(kept.size()) - sig.p;
  if (sig.p < 1) throw Error(ErrorCode::InvalidModel, "B has no positive eigenvalue");

  Eigen::MatrixXd latent(K, sig.dim());
  for (int c = 0; c < sig.dim(); ++c) {
    Eigen::VectorXd u = eig.eigenvectors().col(kept[c]);
    fix_sign(u);
    latent.col(c) = u * std::sqrt(std::abs(values[kept[c]]));
  }

  std::vector<Atom> atoms(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    atoms[k].nu = latent.row(k).transpose();
    atoms[k].weight = params.pi[k];
  }
  return LatentMixture(std::move(atoms), sig);
}

LatentMixture indefinite_orthogonal_transform(const LatentMixture& mix, const Eigen::MatrixXd& W) {
  const int d = mix.dim();
  if (W.rows() != d || W.cols() != d) {
    throw Error(ErrorCode::NotIndefiniteOrthogonal, "W must be " + std::to_string(d) + "x" +
                                                        std::to_string(d));
  }
  const Eigen::MatrixXd I = mix.signature().diagonal().asDiagonal();
  const double defect = (W * I * W.transpose() - I).cwiseAbs().maxCoeff();
  if (!(defect <= kFormTolerance)) {
    std::ostringstream msg;
    msg << "max |W I W^T - I| = " << defect << " exceeds " << kFormTolerance;
    throw Error(ErrorCode::NotIndefiniteOrthogonal, msg.str());
  }
  std::vector<Atom> atoms = mix.atoms();
  for (auto& atom : atoms) atom.nu = W * atom.nu;
  return LatentMixture(std::move(atoms), mix.signature());
}

}  // namespace speclab
