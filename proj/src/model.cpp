#include "relicd/model.hpp"

#include <stdexcept>

#include "relicd/latent.hpp"

namespace relicd {

Model Model::create(const DiagnosticConfig& diagnostic, std::size_t students, std::size_t concepts,
                    std::vector<std::vector<std::uint32_t>> q_rows, Rng& rng) {
  if (students == 0 || concepts == 0 || q_rows.empty()) {
    throw std::invalid_argument("Model::create: empty dimensions");
  }
  Model m;
  m.diagnostic = diagnostic;
  m.students = students;
  m.concepts = concepts;
  m.dim = latent_dim(diagnostic.variant, concepts);
  m.q_rows = std::move(q_rows);
  m.rebuild_q_dense();
  m.store.add(kMeanParam, xavier_init(m.dim, students, rng));
  m.store.add(kLogVarParam, xavier_init(m.dim, students, rng));
  add_diagnostic_params(m.store, diagnostic, m.exercises(), concepts, rng);
  return m;
}

void Model::rebuild_q_dense() {
  q_dense = Matrix(q_rows.size(), concepts);
  for (std::size_t e = 0; e < q_rows.size(); ++e) {
    for (auto c : q_rows[e]) {
      if (c >= concepts) throw std::out_of_range("Model: concept index out of range in Q row");
      q_dense(e, c) = 1.0;
    }
  }
}

std::vector<double> Model::mastery(std::size_t student) const {
  const auto post = posterior_of(student, store);
  std::vector<double> out(post.mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(post.mean[i]);
  return out;
}

std::vector<double> Model::variance(std::size_t student) const {
  return posterior_of(student, store).variance();
}

namespace {

double predict_with(const Model& m, const std::optional<NcdLayers>& mlp, std::size_t student,
                    std::size_t exercise) {
  const auto theta = m.mastery(student);
  const auto ex = exercise_params(exercise, m.store);
  switch (m.diagnostic.variant) {
    case Variant::Irt:
      return predict_irt(theta[0], ex.difficulty[0], ex.discrimination, m.diagnostic.irt_scale);
    case Variant::Mirt:
      return predict_mirt(theta, ex.difficulty, m.q_row(exercise));
    case Variant::Ncd:
      return predict_ncd(theta, ex.difficulty, ex.discrimination, m.q_row(exercise), *mlp);
  }
  throw std::logic_error("unknown variant");
}

}  // namespace

double Model::predict(std::size_t student, std::size_t exercise) const {
  std::optional<NcdLayers> mlp;
  if (diagnostic.variant == Variant::Ncd) mlp = ncd_layers(store);
  return predict_with(*this, mlp, student, exercise);
}

std::vector<double> Model::predict(std::span<const Interaction> all, std::span<const std::size_t> indices) const {
  std::optional<NcdLayers> mlp;
  if (diagnostic.variant == Variant::Ncd) mlp = ncd_layers(store);
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(predict_with(*this, mlp, all[i].student, all[i].exercise));
  return out;
}

}  // namespace relicd
