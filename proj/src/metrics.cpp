#include "fprk/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "fprk/error.hpp"

namespace fprk {

namespace {

std::vector<const EmbeddingRecord*> sorted_by_id(std::span<const EmbeddingRecord* const> items) {
  std::vector<const EmbeddingRecord*> out(items.begin(), items.end());
  std::sort(out.begin(), out.end(),
            [](const EmbeddingRecord* a, const EmbeddingRecord* b) { return a->id < b->id; });
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

// Ranks one query and returns its AP result; shared by score_queries and
// rank_gallery so the two cannot disagree.
ApResult score_row(const EmbeddingRecord& query, const GalleryIndex& gallery,
                   std::span<const double> sims) {
  const auto order = rank_order(sims);
  std::vector<std::uint8_t> relevance(order.size());
  ApResult res;
  res.query_id = query.id;
  res.subject = query.subject;
  for (std::size_t k = 0; k < order.size(); ++k) {
    relevance[k] = gallery.subject(order[k]) == query.subject ? 1 : 0;
    if (relevance[k] && res.first_relevant_rank == 0) res.first_relevant_rank = k + 1;
    res.relevant_count += relevance[k];
  }
  if (res.relevant_count == 0)
    throw ValidationError("query '" + query.id + "': no relevant gallery items for query subject '" +
                          query.subject + "'");
  res.ap = average_precision(relevance);
  return res;
}

void check_query(const EmbeddingRecord& query, const GalleryIndex& gallery) {
  if (query.vector.size() != gallery.dim())
    throw ValidationError("query '" + query.id + "': dimension mismatch with gallery");
}

}  // namespace

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size())
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  const double nu = norm64(u);
  const double nv = norm64(v);
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine: zero-norm vector");
  return cosine_from_norms(u, v, nu, nv);
}

GalleryIndex::GalleryIndex(std::span<const EmbeddingRecord* const> items) {
  if (items.empty()) throw ValidationError("empty gallery");
  const auto sorted = sorted_by_id(items);
  const auto dim = sorted.front()->vector.size();
  for (const auto* r : sorted) {
    if (r->vector.size() != dim)
      throw ValidationError("gallery item '" + r->id + "': dimension mismatch");
    ids_.push_back(r->id);
    subjects_.push_back(r->subject);
    ++subject_counts_[r->subject];
  }
  block_ = VectorBlock(sorted);
}

std::size_t GalleryIndex::count(const std::string& subject) const {
  auto it = subject_counts_.find(subject);
  return it == subject_counts_.end() ? 0 : it->second;
}

std::vector<std::size_t> rank_order(std::span<const double> sims) {
  std::vector<std::size_t> order(sims.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return a < b;
  });
  return order;
}

RankedList rank_gallery(const EmbeddingRecord& query, const GalleryIndex& gallery) {
  check_query(query, gallery);
  const double qn = norm64(query.vector);
  if (qn == 0.0) throw ValidationError("query '" + query.id + "': zero-norm vector");
  std::vector<double> sims(gallery.size());
  for (std::size_t j = 0; j < gallery.size(); ++j)
    sims[j] = cosine_from_norms(query.vector, gallery.block().row(j), qn, gallery.block().norm(j));

  RankedList out;
  out.query_id = query.id;
  out.query_subject = query.subject;
  out.items.reserve(gallery.size());
  for (std::size_t j : rank_order(sims))
    out.items.push_back({gallery.id(j), gallery.subject(j), sims[j],
                         gallery.subject(j) == query.subject});
  return out;
}

double average_precision(std::span<const std::uint8_t> relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < relevance.size(); ++k) {
    if (!relevance[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) throw ValidationError("no relevant gallery items for query subject");
  return sum / static_cast<double>(hits);
}

ApResult average_precision(const RankedList& ranked) {
  std::vector<std::uint8_t> relevance;
  relevance.reserve(ranked.items.size());
  ApResult res;
  res.query_id = ranked.query_id;
  res.subject = ranked.query_subject;
  for (std::size_t k = 0; k < ranked.items.size(); ++k) {
    relevance.push_back(ranked.items[k].relevant ? 1 : 0);
    if (ranked.items[k].relevant) {
      ++res.relevant_count;
      if (res.first_relevant_rank == 0) res.first_relevant_rank = k + 1;
    }
  }
  if (res.relevant_count == 0)
    throw ValidationError("query '" + ranked.query_id +
                          "': no relevant gallery items for query subject");
  res.ap = average_precision(relevance);
  return res;
}

std::string_view to_string(Aggregation a) {
  return a == Aggregation::per_query ? "per-query" : "per-subject-macro";
}

Aggregation parse_aggregation(std::string_view token) {
  if (token == "per-query") return Aggregation::per_query;
  if (token == "per-subject-macro") return Aggregation::per_subject_macro;
  throw ValidationError("unknown aggregation '" + std::string(token) + "'");
}

double mean_average_precision(std::span<const ApResult> results, Aggregation aggregation) {
  if (results.empty()) throw ValidationError("mean_average_precision: empty result collection");
  // subject -> query id -> AP; fixed summation order.
  std::map<std::string, std::map<std::string, double>> grouped;
  for (const auto& r : results) grouped[r.subject][r.query_id] = r.ap;
  if (aggregation == Aggregation::per_query) {
    // Sum in query-id order across all subjects.
    std::map<std::string, double> flat;
    for (const auto& r : results) flat[r.query_id] = r.ap;
    if (flat.size() != results.size())
      throw ValidationError("mean_average_precision: duplicate query ids");
    double sum = 0.0;
    for (const auto& [id, ap] : flat) sum += ap;
    return sum / static_cast<double>(flat.size());
  }
  double sum = 0.0;
  for (const auto& [subject, aps] : grouped) {
    double s = 0.0;
    for (const auto& [id, ap] : aps) s += ap;
    sum += s / static_cast<double>(aps.size());
  }
  return sum / static_cast<double>(grouped.size());
}

std::vector<ApResult> score_queries(std::span<const EmbeddingRecord* const> queries,
                                    const GalleryIndex& gallery, Exec exec) {
  for (const auto* q : queries) check_query(*q, gallery);
  const VectorBlock qblock(queries);
  const auto sims = kernels::similarity_matrix(qblock, gallery.block(), exec);
  const std::size_t ng = gallery.size();
  std::vector<ApResult> out(queries.size());
  const auto nq = static_cast<std::int64_t>(queries.size());
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < nq; ++i) {
      const auto qi = static_cast<std::size_t>(i);
      out[qi] = score_row(*queries[qi], gallery, std::span(sims).subspan(qi * ng, ng));
    }
    return out;
  }
  // Exceptions must not escape an OpenMP region; record the first by index.
  std::vector<std::string> errors(queries.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < nq; ++i) {
    const auto qi = static_cast<std::size_t>(i);
    try {
      out[qi] = score_row(*queries[qi], gallery, std::span(sims).subspan(qi * ng, ng));
    } catch (const std::exception& e) {
      errors[qi] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ValidationError(e);
  return out;
}

double top1_identity_accuracy(std::span<const ApResult> results) {
  if (results.empty()) throw ValidationError("top1_identity_accuracy: no queries");
  std::size_t hits = 0;
  for (const auto& r : results) hits += r.first_relevant_rank == 1 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double top1_identity_accuracy(std::span<const EmbeddingRecord* const> queries,
                              const GalleryIndex& gallery, Exec exec) {
  const auto results = score_queries(queries, gallery, exec);
  return top1_identity_accuracy(results);
}

std::string_view to_string(PairwiseMode mode) {
  return mode == PairwiseMode::vs_reference ? "vs-reference" : "vs-gallery";
}

PairwiseMode parse_pairwise_mode(std::string_view token) {
  if (token == "vs-reference") return PairwiseMode::vs_reference;
  if (token == "vs-gallery") return PairwiseMode::vs_gallery;
  throw ValidationError("unknown pairwise mode '" + std::string(token) + "'");
}

PairwiseSummary pairwise_similarity_score(std::span<const EmbeddingRecord* const> real_side,
                                          std::span<const EmbeddingRecord* const> generated,
                                          PairwiseMode mode, Exec exec) {
  using Group = std::vector<const EmbeddingRecord*>;
  std::map<std::string, Group> real_by, gen_by;
  for (const auto* r : sorted_by_id(real_side)) real_by[r->subject].push_back(r);
  for (const auto* r : sorted_by_id(generated)) gen_by[r->subject].push_back(r);

  std::vector<std::string> one_sided;
  for (const auto& [s, g] : real_by)
    if (!gen_by.contains(s)) one_sided.push_back(s);
  for (const auto& [s, g] : gen_by)
    if (!real_by.contains(s)) one_sided.push_back(s);
  if (!one_sided.empty())
    throw ValidationError("pairwise similarity: subjects present on one side only: " +
                          join(one_sided));
  if (real_by.empty()) throw ValidationError("pairwise similarity: no subjects to score");

  PairwiseSummary out;
  out.mode = mode;
  for (const auto& [s, g] : real_by) out.subjects.push_back({s, mode, 0.0, 0});
  std::vector<double> sums(out.subjects.size());

  const auto ns = static_cast<std::int64_t>(out.subjects.size());
  auto score_subject = [&](std::size_t si) {
    const VectorBlock real_block(real_by.at(out.subjects[si].subject));
    const VectorBlock gen_block(gen_by.at(out.subjects[si].subject));
    const auto sims = kernels::similarity_matrix_serial(real_block, gen_block);
    double sum = 0.0;
    for (double c : sims) sum += c;
    sums[si] = sum;
    out.subjects[si].pair_count = sims.size();
    out.subjects[si].mean = sum / static_cast<double>(sims.size());
  };
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < ns; ++i) score_subject(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < ns; ++i) score_subject(static_cast<std::size_t>(i));
  }

  double subject_sum = 0.0;
  double pair_sum = 0.0;
  for (std::size_t i = 0; i < out.subjects.size(); ++i) {
    subject_sum += out.subjects[i].mean;
    pair_sum += sums[i];
    out.pair_count += out.subjects[i].pair_count;
  }
  out.dataset_mean = subject_sum / static_cast<double>(out.subjects.size());
  out.pair_mean = pair_sum / static_cast<double>(out.pair_count);
  return out;
}

double text_adherence_score(std::span<const EmbeddingRecord* const> prompts,
                            std::span<const EmbeddingRecord* const> generated,
                            const std::map<std::string, std::string>& pairing) {
  if (generated.empty()) throw ValidationError("text adherence: no generated records");
  std::map<std::string_view, const EmbeddingRecord*> prompt_by_id;
  for (const auto* p : prompts) prompt_by_id.emplace(p->id, p);
  double sum = 0.0;
  for (const auto* g : sorted_by_id(generated)) {
    auto pit = pairing.find(g->id);
    if (pit == pairing.end())
      throw ValidationError("text adherence: generated record '" + g->id + "' has no paired prompt");
    auto it = prompt_by_id.find(pit->second);
    if (it == prompt_by_id.end())
      throw ValidationError("text adherence: generated record '" + g->id + "' pairs with unknown prompt '" +
                            pit->second + "'");
    sum += cosine(it->second->vector, g->vector);
  }
  return sum / static_cast<double>(generated.size());
}

}  // namespace fprk
