#include "emosim/templates.hpp"

#include <regex>

#include "emosim/error.hpp"
#include "emosim/jsonl.hpp"

namespace emosim {

namespace {
const std::regex& placeholder_re() {
    static const std::regex re(R"(\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\})");
    return re;
}
} // namespace

std::set<std::string> PromptTemplate::placeholders() const {
    std::set<std::string> out;
    for (std::sregex_iterator it(body.begin(), body.end(), placeholder_re()), end; it != end; ++it)
        out.insert((*it)[1].str());
    return out;
}

void PromptTemplate::validate() const {
    const auto present = placeholders();
    for (const auto& r : required_placeholders)
        if (!present.contains(r))
            fail(ErrorCode::TemplateError, "template '" + name + "' lacks required placeholder {{" + r + "}}");
}

std::string PromptTemplate::render(const Bindings& bindings) const {
    for (const auto& r : required_placeholders)
        if (!bindings.contains(r))
            fail(ErrorCode::TemplateError, "template '" + name + "': no binding for {{" + r + "}}");

    std::string out;
    out.reserve(body.size());
    auto last = body.cbegin();
    for (std::sregex_iterator it(body.begin(), body.end(), placeholder_re()), end; it != end; ++it) {
        const auto& m = *it;
        auto b = bindings.find(m[1].str());
        if (b == bindings.end())
            fail(ErrorCode::TemplateError, "template '" + name + "': no binding for {{" + m[1].str() + "}}");
        out.append(last, m[0].first);
        out += b->second;
        last = m[0].second;
    }
    out.append(last, body.cend());
    return out;
}

const std::set<std::string>& TemplateRegistry::standard_names() {
    static const std::set<std::string> names{
        "profile_generation", "random_event",  "profile_event", "conversation_no_se", "conversation_with_se",
        "group_profile",      "topic_steps",   "next_speaker",  "member_response",    "agreement_check",
    };
    return names;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(jsonl::read_file(manifest_path));
    } catch (const json::exception& e) {
        fail(ErrorCode::TemplateError, manifest_path.string() + ": " + e.what());
    }

    TemplateRegistry reg;
    reg.version_ = manifest.value("version", "unversioned");
    for (const auto& entry : manifest.at("templates")) {
        PromptTemplate t;
        t.name = entry.at("name").get<std::string>();
        t.body = jsonl::read_file(dir / entry.at("file").get<std::string>());
        for (const auto& r : entry.value("required", std::vector<std::string>{}))
            t.required_placeholders.insert(r);
        reg.add(std::move(t));
    }
    for (const auto& n : standard_names())
        if (!reg.contains(n))
            fail(ErrorCode::TemplateError, "template registry at " + dir.string() + " lacks '" + n + "'");
    return reg;
}

void TemplateRegistry::add(PromptTemplate t) {
    t.validate();
    auto name = t.name;
    templates_.insert_or_assign(std::move(name), std::move(t));
}

bool TemplateRegistry::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const PromptTemplate& TemplateRegistry::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end())
        fail(ErrorCode::TemplateError, "unknown template '" + std::string(name) + "'");
    return it->second;
}

std::string PromptRunner::render(std::string_view template_name, const Bindings& bindings) const {
    return templates_.get(template_name).render(bindings);
}

std::string PromptRunner::ask(std::string_view template_name, const Bindings& bindings,
                              const std::string& request_tag, double temperature) {
    auto prompt = render(template_name, bindings);
    auto req = ChatRequest::make(request_tag, {}, std::move(prompt), temperature);
    req.model = model_;
    return backend_.complete(req).text;
}

} // namespace emosim
