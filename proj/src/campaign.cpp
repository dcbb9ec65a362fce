#include <logaction/campaign.hpp>
#include <logaction/hashing.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace logaction {

using nlohmann::json;

const char* to_string(query_status s)
{
    switch (s) {
    case query_status::pending: return "pending";
    case query_status::labeled: return "labeled";
    case query_status::skipped: return "skipped";
    }
    return "?";
}

namespace {

query_status status_from_string(const std::string& s)
{
    if (s == "pending") return query_status::pending;
    if (s == "labeled") return query_status::labeled;
    if (s == "skipped") return query_status::skipped;
    throw load_error("unknown query status " + s);
}

json to_json(const selection_score& s)
{
    return {{"window", s.window_index}, {"e0", s.e0}, {"e1", s.e1}, {"F", s.free_energy},
            {"U", s.uncertainty},       {"p0", s.p0}, {"p1", s.p1}};
}

selection_score score_from_json(const json& j)
{
    return {j.at("window"), j.at("e0"), j.at("e1"), j.at("F"), j.at("U"), j.at("p0"), j.at("p1")};
}

json to_json(const metrics_report& m)
{
    return {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}, {"precision", m.precision},
            {"recall", m.recall}, {"f1", m.f1}, {"experiment_id", m.experiment_id}, {"round", m.round},
            {"budget_fraction", m.budget_fraction}};
}

metrics_report metrics_from_json(const json& j)
{
    metrics_report m;
    m.tp = j.at("tp");
    m.fp = j.at("fp");
    m.tn = j.at("tn");
    m.fn = j.at("fn");
    m.precision = j.at("precision");
    m.recall = j.at("recall");
    m.f1 = j.at("f1");
    m.experiment_id = j.at("experiment_id");
    m.round = j.at("round");
    m.budget_fraction = j.at("budget_fraction");
    return m;
}

json to_json(const query_item& q)
{
    json j = {{"query_id", q.query_id}, {"window", q.window_index}, {"round", q.round},
              {"raw_lines", q.raw_lines}, {"template_lines", q.template_lines}, {"score", to_json(q.score)},
              {"status", to_string(q.status)}, {"provenance", q.provenance}};
    j["label"] = q.label ? json(*q.label) : json(nullptr);
    j["labeler_id"] = q.labeler_id ? json(*q.labeler_id) : json(nullptr);
    return j;
}

query_item query_from_json(const json& j)
{
    query_item q;
    q.query_id = j.at("query_id");
    q.window_index = j.at("window");
    q.round = j.at("round");
    q.raw_lines = j.at("raw_lines").get<std::vector<std::string>>();
    q.template_lines = j.at("template_lines").get<std::vector<std::string>>();
    q.score = score_from_json(j.at("score"));
    q.status = status_from_string(j.at("status"));
    q.provenance = j.at("provenance");
    if (!j.at("label").is_null()) q.label = j.at("label").get<int>();
    if (!j.at("labeler_id").is_null()) q.labeler_id = j.at("labeler_id").get<std::string>();
    return q;
}

} // namespace

std::size_t campaign_state::round_quota() const
{
    return static_cast<std::size_t>(std::floor(budget * static_cast<double>(original_pool_size) + 1e-9));
}

std::vector<std::size_t> campaign_state::pending_queries() const
{
    std::vector<std::size_t> out;
    for (const auto& q : queries) {
        if (q.status == query_status::pending) out.push_back(q.query_id);
    }
    return out;
}

std::string variant_name(const campaign_options& o)
{
    if (!o.transfer) return "wt";
    switch (o.variant) {
    case selection_variant::full: return "full";
    case selection_variant::random_quota: return "wa";
    case selection_variant::random_second_stage: return "wu";
    case selection_variant::uncertainty_only: return "we";
    }
    return "?";
}

campaign::campaign(const system_data& source, const system_data& target, experiment_config cfg, campaign_options opts)
    : source_(&source), target_(&target), cfg_(std::move(cfg)), opts_(opts)
{
    cfg_.validate();
    state_.original_pool_size = target.train_windows.size();
    state_.budget = cfg_.active_ratio;
    state_.first_ratio = cfg_.first_sample_ratio;
    for (const auto& w : target.train_windows) state_.unlabeled_target.insert(w.window_index);
}

training_schedule campaign::schedule(int epochs, const std::string& stage) const
{
    return training_schedule{epochs, cfg_.batch_size, cfg_.learning_rate, cfg_.clip_norm, derive_seed(cfg_.seed, stage)};
}

void campaign::refresh_vectors()
{
    source_vectors_ = opts_.transfer ? encode_windows<double>(encoder_, pointers(source_->train_windows))
                                     : matrix_type(encoder_.output_dim(), 0);
    pool_vectors_ = encode_windows<double>(encoder_, pointers(target_->train_windows));
    test_vectors_ = encode_windows<double>(encoder_, pointers(target_->test_windows));
}

matrix_type campaign::gather_pool(const std::vector<std::size_t>& windows) const
{
    matrix_type out(pool_vectors_.rows(), static_cast<Eigen::Index>(windows.size()));
    for (std::size_t i = 0; i < windows.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = pool_vectors_.col(static_cast<Eigen::Index>(windows[i]));
    }
    return out;
}

void campaign::pretrain()
{
    pretrain_encoder();
    pretrain_classifier();
}

void campaign::pretrain_encoder()
{
    if (state_.encoder_trained) return;
    encoder_ = lstm_encoder<double>(cfg_.d_w, cfg_.encoder_hidden, cfg_.encoder_layers, derive_seed(cfg_.seed, "encoder-init"));
    disc_ = discriminator<double>(cfg_.encoder_hidden, derive_seed(cfg_.seed, "discriminator-init"));
    if (opts_.transfer) {
        std::vector<labeled_window> pool;
        for (const auto& w : source_->train_windows) pool.push_back({&w, w.label});
        auto enc = train_encoder<double>(pool, encoder_, disc_, schedule(cfg_.epochs, "encoder-pretrain"));
        encoder_ = std::move(enc.encoder);
        disc_ = std::move(enc.disc);
    }
    state_.encoder_trained = true;
}

void campaign::pretrain_classifier()
{
    if (state_.pretrained) return;
    if (!state_.encoder_trained) throw contract_error("train the encoder before the classifier");
    classifier_ = energy_classifier<double>(cfg_.classifier_input, cfg_.classifier_hidden, cfg_.classifier_layer,
                                            derive_seed(cfg_.seed, "classifier-init"));
    refresh_vectors();
    if (opts_.transfer) {
        classifier_ = train_source(source_vectors_, source_->train_labels(), classifier_,
                                   schedule(cfg_.epochs, "classifier-pretrain"))
                          .classifier;
    } else {
        classifier_.set_phase(classifier_phase::target);
    }
    state_.pretrained = true;
    round_record r0;
    r0.round = 0;
    r0.metrics = evaluate();
    state_.history.push_back(std::move(r0));
}

campaign campaign::fork(const campaign_options& opts, const std::string& experiment_id) const
{
    if (state_.round != 0 || state_.round_open()) throw contract_error("campaigns can only be forked before round 1");
    if (opts.transfer != opts_.transfer) throw contract_error("fork cannot toggle source pretraining");
    campaign c = *this;
    c.opts_ = opts;
    if (!experiment_id.empty()) {
        c.cfg_.experiment_id = experiment_id;
        for (auto& r : c.state_.history) r.metrics.experiment_id = experiment_id;
    }
    return c;
}

metrics_report campaign::evaluate() const
{
    const matrix_type e = classifier_.forward(test_vectors_);
    std::vector<int> pred(static_cast<std::size_t>(e.cols()));
    for (Eigen::Index j = 0; j < e.cols(); ++j) pred[static_cast<std::size_t>(j)] = predict(energy_pair<double>{e(0, j), e(1, j)});
    auto m = compute_metrics(pred, target_->test_labels());
    m.experiment_id = cfg_.experiment_id;
    m.round = state_.round;
    m.budget_fraction = state_.original_pool_size
                            ? static_cast<double>(state_.labeled_target.size()) / static_cast<double>(state_.original_pool_size)
                            : 0.0;
    return m;
}

std::vector<selection_score> campaign::score_pool() const
{
    const std::vector<std::size_t> windows(state_.unlabeled_target.begin(), state_.unlabeled_target.end());
    const auto rule = cfg_.probability_rule == "boltzmann" ? probability_rule::boltzmann : probability_rule::energy_ratio;
    return score_vectors(classifier_, gather_pool(windows), windows, rule);
}

const std::vector<query_item>& campaign::begin_round()
{
    if (!state_.pretrained) throw contract_error("pretrain before starting a round");
    if (state_.round_open()) return state_.queries;
    if (finished()) throw contract_error("campaign already ran all configured rounds");
    if (state_.unlabeled_target.empty()) throw contract_error("unlabeled target pool is empty");
    const auto quota = state_.round_quota();
    if (quota < 1) throw contract_error("round quota is zero; raise active_ratio");

    state_.round_scores = score_pool();
    const std::size_t round = state_.round + 1;
    std::mt19937_64 rng(derive_seed(cfg_.seed, "selection-round-" + std::to_string(round)));
    const auto chosen = select_windows(state_.round_scores, state_.first_ratio,
                                       std::min(quota, state_.unlabeled_target.size()),
                                       uncertainty_order_from_string(cfg_.uncertainty_order), opts_.variant, rng);

    std::map<std::size_t, const selection_score*> by_window;
    for (const auto& s : state_.round_scores) by_window[s.window_index] = &s;
    for (auto w : chosen) {
        if (state_.labeled_target.count(w)) throw std::logic_error("selected an already labeled window");
        const auto& seq = target_->train_windows.at(w);
        query_item q;
        q.query_id = state_.next_query_id++;
        q.window_index = w;
        q.round = round;
        q.raw_lines = target_->raw_lines(seq);
        q.template_lines = target_->template_lines(seq);
        q.score = *by_window.at(w);
        state_.unlabeled_target.erase(w);
        state_.queries.push_back(std::move(q));
    }
    return state_.queries;
}

submit_outcome campaign::submit(std::size_t query_id, int label_or_skip, const std::string& labeler_id,
                                const std::string& provenance)
{
    if (label_or_skip < -1 || label_or_skip > 1) throw contract_error("label must be 0, 1, or -1 (skip)");
    for (auto& q : state_.queries) {
        if (q.query_id != query_id) continue;
        if (q.status != query_status::pending) return submit_outcome::duplicate;
        if (label_or_skip < 0) {
            q.status = query_status::skipped;
        } else {
            q.status = query_status::labeled;
            q.label = label_or_skip;
        }
        q.labeler_id = labeler_id;
        q.provenance = provenance;
        return submit_outcome::accepted;
    }
    return submit_outcome::unknown_query;
}

bool campaign::relabel(std::size_t query_id, int label)
{
    if (label != 0 && label != 1) throw contract_error("relabel needs label 0 or 1");
    for (auto& q : state_.queries) {
        if (q.query_id == query_id && q.status == query_status::labeled) {
            q.label = label;
            return true;
        }
    }
    return false;
}

const round_record& campaign::complete_round()
{
    if (!state_.round_open()) throw contract_error("no open round");
    if (!state_.pending_queries().empty()) throw contract_error("round still has pending queries");

    round_record rec;
    rec.round = state_.round + 1;
    for (const auto& q : state_.queries) {
        rec.selected.push_back(q.window_index);
        rec.provenance.push_back(q.provenance);
        rec.labelers.push_back(q.labeler_id.value_or(""));
        if (q.status == query_status::labeled) {
            state_.labeled_target[q.window_index] = *q.label;
            rec.labels.push_back(*q.label);
        } else {
            state_.unlabeled_target.insert(q.window_index);
            rec.labels.push_back(-1);
        }
    }
    state_.queries.clear();

    std::vector<std::size_t> labeled;
    std::vector<int> labels;
    for (auto [w, y] : state_.labeled_target) {
        labeled.push_back(w);
        labels.push_back(y);
    }
    const bool both_classes = std::count(labels.begin(), labels.end(), 0) > 0 && std::count(labels.begin(), labels.end(), 1) > 0;
    const auto tag = std::to_string(rec.round);

    if (opts_.transfer) {
        std::vector<labeled_window> pool;
        for (const auto& w : source_->train_windows) pool.push_back({&w, w.label});
        const auto copies = domain_copies(source_->train_windows.size(), labeled.size());
        for (std::size_t k = 0; k < copies; ++k) {
            for (std::size_t i = 0; i < labeled.size(); ++i) pool.push_back({&target_->train_windows[labeled[i]], labels[i]});
        }
        auto enc = train_encoder<double>(pool, encoder_, disc_, schedule(cfg_.refresh_epochs, "encoder-refresh-" + tag));
        encoder_ = std::move(enc.encoder);
        disc_ = std::move(enc.disc);
    } else if (both_classes) {
        std::vector<labeled_window> pool;
        for (std::size_t i = 0; i < labeled.size(); ++i) pool.push_back({&target_->train_windows[labeled[i]], labels[i]});
        auto enc = train_encoder<double>(pool, encoder_, disc_, schedule(cfg_.epochs, "encoder-target-" + tag));
        encoder_ = std::move(enc.encoder);
        disc_ = std::move(enc.disc);
    }
    refresh_vectors();

    if (!labeled.empty() && (opts_.transfer || both_classes)) {
        const matrix_type target_vecs = gather_pool(labeled);
        const std::vector<std::size_t> rest(state_.unlabeled_target.begin(), state_.unlabeled_target.end());
        const matrix_type unlabeled_vecs = gather_pool(rest);
        const auto source_labels = source_->train_labels();
        finetune_inputs in;
        if (opts_.transfer) {
            in.source_vectors = &source_vectors_;
            in.source_labels = &source_labels;
        }
        in.target_vectors = &target_vecs;
        in.target_labels = &labels;
        in.unlabeled_vectors = &unlabeled_vecs;
        const int epochs = opts_.transfer ? cfg_.finetune_epochs : cfg_.epochs;
        classifier_ = finetune(classifier_, in, cfg_.energy_align_weight, schedule(epochs, "finetune-" + tag)).classifier;
    }

    state_.round = rec.round;
    rec.metrics = evaluate();
    state_.history.push_back(std::move(rec));
    return state_.history.back();
}

campaign::round_status campaign::run_round(oracle& o)
{
    begin_round();
    for (auto& q : state_.queries) {
        if (q.status != query_status::pending) continue;
        if (auto a = o.answer(q)) submit(q.query_id, *a, o.labeler_id(), o.provenance());
    }
    if (!state_.pending_queries().empty()) return round_status::suspended;
    complete_round();
    return round_status::completed;
}

bool campaign::run(oracle& o)
{
    pretrain();
    while (!finished()) {
        if (run_round(o) == round_status::suspended) return false;
    }
    return true;
}

std::vector<metrics_report> campaign::metrics_by_round() const
{
    std::vector<metrics_report> out;
    for (const auto& r : state_.history) out.push_back(r.metrics);
    return out;
}

std::uint64_t campaign::state_digest() const
{
    fnv1a h;
    h.update_value(state_.round);
    h.update_value(state_.original_pool_size);
    for (auto [w, y] : state_.labeled_target) {
        h.update_value(w);
        h.update_value(y);
    }
    h.update("|");
    for (auto w : state_.unlabeled_target) h.update_value(w);
    h.update("|");
    for (const auto& q : state_.queries) {
        h.update_value(q.window_index);
        h.update_value(static_cast<int>(q.status));
        h.update_value(q.label.value_or(-2));
    }
    h.update("|");
    for (const auto& r : state_.history) {
        h.update_value(r.round);
        for (auto w : r.selected) h.update_value(w);
        for (auto y : r.labels) h.update_value(y);
    }
    const auto add = [&h](const vector_type& v) { h.update(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double)); };
    add(encoder_.parameters());
    add(disc_.parameters());
    add(classifier_.parameters());
    return h.digest();
}

void campaign::save(const std::filesystem::path& dir, bool with_models) const
{
    std::filesystem::create_directories(dir);
    json j;
    j["format"] = "logaction-campaign";
    j["version"] = 1;
    j["config_digest"] = cfg_.digest_hex();
    j["variant"] = variant_name(opts_);
    j["encoder_trained"] = state_.encoder_trained;
    j["pretrained"] = state_.pretrained;
    j["round"] = state_.round;
    j["original_pool_size"] = state_.original_pool_size;
    j["budget"] = state_.budget;
    j["first_ratio"] = state_.first_ratio;
    j["next_query_id"] = state_.next_query_id;
    j["labeled_target"] = json::array();
    for (auto [w, y] : state_.labeled_target) j["labeled_target"].push_back({w, y});
    j["unlabeled_target"] = state_.unlabeled_target;
    j["queries"] = json::array();
    for (const auto& q : state_.queries) j["queries"].push_back(to_json(q));
    j["round_scores"] = json::array();
    for (const auto& s : state_.round_scores) j["round_scores"].push_back(to_json(s));
    j["history"] = json::array();
    for (const auto& r : state_.history) {
        j["history"].push_back({{"round", r.round}, {"selected", r.selected}, {"labels", r.labels},
                                {"provenance", r.provenance}, {"labelers", r.labelers}, {"metrics", to_json(r.metrics)}});
    }
    j["state_digest"] = hex_digest(state_digest());
    {
        // write then rename so a crash never leaves a torn state file
        const auto tmp = dir / "state.json.tmp";
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write campaign state in " + dir.string());
        out << j.dump(1);
        out.close();
        std::filesystem::rename(tmp, dir / "state.json");
    }
    if (!with_models) return;
    if (state_.encoder_trained) save_encoder(dir / "encoder.ckpt", encoder_, disc_, static_cast<int>(state_.round), cfg_.digest_hex());
    if (state_.pretrained) save_classifier(dir / "classifier.ckpt", classifier_, cfg_.digest_hex());
}

void campaign::restore(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "state.json");
    if (!in) throw load_error("no campaign state in " + dir.string());
    try {
        const auto j = json::parse(in);
        if (j.at("format") != "logaction-campaign" || j.at("version") != 1) throw load_error("not a campaign state file");
        if (j.at("config_digest") != cfg_.digest_hex()) {
            throw load_error("campaign state was produced by config " + j.at("config_digest").get<std::string>() +
                             ", current config is " + cfg_.digest_hex());
        }
        if (j.at("variant") != variant_name(opts_)) throw load_error("campaign state belongs to variant " + j.at("variant").get<std::string>());
        campaign_state s;
        s.encoder_trained = j.at("encoder_trained");
        s.pretrained = j.at("pretrained");
        s.round = j.at("round");
        s.original_pool_size = j.at("original_pool_size");
        s.budget = j.at("budget");
        s.first_ratio = j.at("first_ratio");
        s.next_query_id = j.at("next_query_id");
        for (const auto& p : j.at("labeled_target")) s.labeled_target[p.at(0)] = p.at(1);
        s.unlabeled_target = j.at("unlabeled_target").get<std::set<std::size_t>>();
        for (const auto& q : j.at("queries")) s.queries.push_back(query_from_json(q));
        for (const auto& sc : j.at("round_scores")) s.round_scores.push_back(score_from_json(sc));
        for (const auto& r : j.at("history")) {
            round_record rec;
            rec.round = r.at("round");
            rec.selected = r.at("selected").get<std::vector<std::size_t>>();
            rec.labels = r.at("labels").get<std::vector<int>>();
            rec.provenance = r.at("provenance").get<std::vector<std::string>>();
            rec.labelers = r.at("labelers").get<std::vector<std::string>>();
            rec.metrics = metrics_from_json(r.at("metrics"));
            s.history.push_back(std::move(rec));
        }
        if (s.original_pool_size != target_->train_windows.size()) throw load_error("campaign state does not match the target pool");
        state_ = std::move(s);
        if (state_.encoder_trained) std::tie(encoder_, disc_) = load_encoder(dir / "encoder.ckpt");
        if (state_.pretrained) {
            classifier_ = load_classifier(dir / "classifier.ckpt");
            refresh_vectors();
        }
    } catch (const json::exception& e) {
        throw load_error(std::string("corrupted campaign state: ") + e.what());
    }
}

std::string metrics_table(const std::vector<metrics_report>& rows, const std::string& digest)
{
    std::ostringstream out;
    out << "# logaction-metrics v1 digest=" << digest << '\n';
    out << "experiment_id,round,budget_fraction,tp,fp,tn,fn,precision,recall,f1\n";
    char buf[256];
    for (const auto& m : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", m.experiment_id.c_str(), m.round,
                      m.budget_fraction, m.tp, m.fp, m.tn, m.fn, m.precision, m.recall, m.f1);
        out << buf;
    }
    return out.str();
}

} // namespace logaction
