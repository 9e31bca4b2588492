#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "emosim/gateway.hpp"

namespace emosim {

using Bindings = std::map<std::string, std::string>;

/// Text with {{placeholder}} slots.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::set<std::string> required_placeholders;

    /// Every placeholder name occurring in the body.
    std::set<std::string> placeholders() const;

    /// Throws TemplateError when a required placeholder is absent from the body.
    void validate() const;

    /// Substitute every placeholder. Throws TemplateError if any placeholder
    /// in the body (or any required one) is unbound.
    std::string render(const Bindings& bindings) const;
};

/// Named templates loaded from a directory holding manifest.json and one
/// UTF-8 text file per template.
class TemplateRegistry {
public:
    /// Names every pipeline stage expects to find.
    static const std::set<std::string>& standard_names();

    static TemplateRegistry load(const std::filesystem::path& dir);

    void add(PromptTemplate t);
    bool contains(std::string_view name) const;
    const PromptTemplate& get(std::string_view name) const;

    const std::string& version() const { return version_; }
    std::size_t size() const { return templates_.size(); }

private:
    std::string version_ = "unversioned";
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Renders a registry template and sends it through a backend. Rendering
/// happens before the gateway is touched, so a bad binding never costs a call.
class PromptRunner {
public:
    PromptRunner(Backend& backend, const TemplateRegistry& templates, std::string model = {})
        : backend_(backend), templates_(templates), model_(std::move(model)) {}

    std::string render(std::string_view template_name, const Bindings& bindings) const;

    std::string ask(std::string_view template_name, const Bindings& bindings,
                    const std::string& request_tag, double temperature = 0.7);

    Backend& backend() { return backend_; }
    const TemplateRegistry& templates() const { return templates_; }
    const std::string& model() const { return model_; }

private:
    Backend& backend_;
    const TemplateRegistry& templates_;
    std::string model_;
};

} // namespace emosim
