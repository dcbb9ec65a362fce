#pragma once
#include <logaction/parsing.hpp>
#include <logaction/types.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace logaction {

class embedding_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct event_embedding
{
    std::size_t template_id = 0;
    vector_type vector;
    std::string backend_id;
};

class embedding_backend
{
public:
    virtual ~embedding_backend() = default;
    virtual std::string backend_id() const = 0;
    virtual int dimension() const = 0;
    /// Vector for a token sequence (wildcards included as "<*>").
    virtual vector_type embed_tokens(const std::vector<std::string>& tokens) const = 0;
};

// Each token maps to a seeded pseudo-random unit vector; a template is the
// mean of its token vectors. The wildcard gets a reserved vector drawn from a
// separate salt.
class hashed_token_backend final : public embedding_backend
{
public:
    hashed_token_backend(int dimension, std::uint64_t seed);

    std::string backend_id() const override;
    int dimension() const override { return dimension_; }
    vector_type embed_tokens(const std::vector<std::string>& tokens) const override;

    vector_type token_vector(std::string_view token) const;

private:
    int dimension_;
    std::uint64_t seed_;
};

struct language_model_config
{
    std::string model;     // model name forwarded to the adapter
    std::string endpoint;  // http://host:port/path
    int dimension = 512;   // d_w after projection
    std::uint64_t seed = 0;
    double timeout_seconds = 30;
};

// Adapter to an external pretrained language model served over HTTP.
//
// Request:  POST {"model": <name>, "text": <template text>}
// Response: {"embedding": [..]} (already pooled) or {"token_states": [[..],..]}
//           (final-layer states, mean-pooled here).
// Vectors whose width differs from the configured dimension go through a
// fixed seeded Gaussian projection.
class language_model_backend final : public embedding_backend
{
public:
    explicit language_model_backend(language_model_config config);

    std::string backend_id() const override;
    int dimension() const override { return config_.dimension; }
    vector_type embed_tokens(const std::vector<std::string>& tokens) const override;

private:
    const matrix_type& projection(int model_dim) const;

    language_model_config config_;
    mutable std::mutex mutex_;
    mutable std::optional<matrix_type> projection_;
};

std::unique_ptr<embedding_backend> make_backend(const std::string& name, int dimension, std::uint64_t seed,
                                                const language_model_config& lm = {});

// Vectors keyed by (backend_id, template text). File format:
//   logaction-embcache v1
//   <backend_id>\t<template text>\t<v1 v2 ...>
class embedding_cache
{
public:
    std::optional<vector_type> find(const std::string& backend_id, const std::string& text) const;
    void insert(const std::string& backend_id, const std::string& text, const vector_type& v);
    std::size_t size() const { return entries_.size(); }

    void save(const std::filesystem::path& path) const;
    static embedding_cache load(const std::filesystem::path& path);

private:
    std::map<std::pair<std::string, std::string>, vector_type> entries_;
};

event_embedding embed_template(const log_template& tmpl, const embedding_backend& backend);

std::map<std::size_t, event_embedding> embed_corpus(const std::vector<log_template>& templates,
                                                    const embedding_backend& backend,
                                                    embedding_cache* cache = nullptr);

/// Row i is the embedding of template i.
matrix_type embedding_table(const std::map<std::size_t, event_embedding>& embeddings, int dimension);

} // namespace logaction
