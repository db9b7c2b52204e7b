// SPDX-License-Identifier: Apache-2.0
#include <citynav/agent.hpp>
#include <citynav/error.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace citynav::agent
{

namespace detail
{
const std::map<std::string, std::string>& prompt_assets();
}

namespace
{

constexpr std::string_view kSystemText =
    "You are an embodied agent walking through a real city. You only see street-level images at intersections "
    "and must reach the destination using your own knowledge of the city.";

const std::string& asset(const std::string& name)
{
    const auto& assets = detail::prompt_assets();
    const auto it = assets.find(name);
    if (it == assets.end())
        fail(ErrorCode::ConfigError, "missing built-in prompt asset '" + name + "'");
    return it->second;
}

// Drops runs of blank lines left behind by empty optional blocks.
std::string collapse_blank_lines(const std::string& text)
{
    std::string out;
    out.reserve(text.size());
    int newlines = 0;
    for (const char c: text)
    {
        if (c == '\n')
        {
            if (++newlines > 2)
                continue;
        }
        else
        {
            newlines = 0;
        }
        out.push_back(c);
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
    {
        if (i > 0)
            out += sep;
        out += parts[i];
    }
    return out;
}

std::string response_contract(const env::Observation& obs, const PromptTemplates& templates)
{
    const auto ids = obs.option_ids();
    return render_template(templates.response_contract, {
                                                            {"valid_ids", join(ids, " | ")},
                                                            {"example_id", ids.empty() ? "" : ids.front()},
                                                        });
}

std::vector<std::string> legend(const env::Observation& obs)
{
    std::vector<std::string> lines;
    lines.reserve(obs.options.size());
    for (const auto& o: obs.options)
        lines.push_back(legend_line(o));
    return lines;
}

std::string memory_block(const AgentMemory& mem)
{
    return "MEMORY FROM PREVIOUS STEP:\n" + (mem.markovian.empty() ? std::string("(none yet)") : mem.markovian);
}

std::string history_block(const AgentMemory& mem)
{
    std::string out = "DECISION HISTORY (oldest first):";
    if (mem.decision_history.empty())
        return out + "\n(no decisions yet)";
    for (const auto& d: mem.decision_history)
        out += "\nstep " + std::to_string(d.step_index) + ": went " + std::string(geo::to_string(d.compass));
    return out;
}

std::string previous_visits_block(const AgentMemory& mem, const graph::NodeId& node)
{
    const auto it = mem.prior_decisions_at.find(node);
    if (it == mem.prior_decisions_at.end() || it->second.empty())
        return {};

    const auto countIt = mem.visit_counts.find(node);
    const int visits = countIt == mem.visit_counts.end() ? static_cast<int>(it->second.size()) : countIt->second;

    std::vector<std::string> choices;
    std::vector<std::string> tried;
    std::set<std::string_view> seen;
    for (const auto& p: it->second)
    {
        const auto label = geo::to_string(p.compass);
        choices.push_back("step " + std::to_string(p.step_index) + ": " + std::string(label));
        if (seen.insert(label).second)
            tried.emplace_back(label);
    }

    std::string out = "PREVIOUS VISITS: you have already been at this intersection " + std::to_string(visits)
                      + (visits == 1 ? " time" : " times") + ".\nEarlier decisions here: " + join(choices, ", ")
                      + ".\n";
    const std::string repeated = join(tried, " or ");
    if (visits <= 1)
        out += "Do not repeat " + repeated + " unless it clearly brought you closer to the destination.";
    else if (visits == 2)
        out += "You are probably going in circles. Do not repeat " + repeated
               + "; prefer a direction you have not taken from here.";
    else
        out += "You are stuck in a loop (visit " + std::to_string(visits + 1) + " to this intersection). Do NOT choose "
               + repeated + " again; take a direction you have never taken from here.";
    return out;
}

PromptBundle make_bundle(const env::Observation& obs, std::string user_text, std::string purpose)
{
    PromptBundle b;
    b.system_text = std::string(kSystemText);
    b.user_text = collapse_blank_lines(user_text);
    for (const auto& o: obs.options)
        b.images.push_back(o.image);
    b.option_legend = legend(obs);
    b.valid_ids = obs.option_ids();
    b.step_index = obs.step_index;
    b.purpose = std::move(purpose);
    return b;
}

} // namespace

std::string AgentMemory::position_line() const
{
    if (position_evidence.empty())
        return position_estimate;
    return position_estimate + " (evidence: " + position_evidence + ")";
}

const PromptTemplates& PromptTemplates::builtin()
{
    static const PromptTemplates t {
        .agentnav = asset("agentnav_v1"),
        .base = asset("base_v1"),
        .self_position = asset("self_position_v1"),
        .response_contract = asset("response_contract_v1"),
    };
    return t;
}

PromptTemplates PromptTemplates::from_directory(const std::filesystem::path& dir)
{
    PromptTemplates t = builtin();
    auto load = [&](const char* file, std::string& slot) {
        std::ifstream in(dir / file, std::ios::binary);
        if (!in)
            return;
        std::ostringstream buf;
        buf << in.rdbuf();
        slot = buf.str();
        // Copies of the shipped templates carry a license line; drop it.
        if (slot.starts_with("# SPDX-License-Identifier:"))
            slot.erase(0, slot.find('\n') == std::string::npos ? slot.size() : slot.find('\n') + 1);
    };
    load("agentnav.txt", t.agentnav);
    load("base.txt", t.base);
    load("self_position.txt", t.self_position);
    load("response_contract.txt", t.response_contract);
    return t;
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars)
{
    std::string out;
    out.reserve(tpl.size() * 2);
    std::size_t pos = 0;
    while (pos < tpl.size())
    {
        const auto open = tpl.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(tpl.substr(pos));
            break;
        }
        const auto close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos)
            fail(ErrorCode::ConfigError, "unterminated placeholder in prompt template");
        out.append(tpl.substr(pos, open - pos));
        const std::string name(tpl.substr(open + 2, close - open - 2));
        const auto it = vars.find(name);
        if (it == vars.end())
            fail(ErrorCode::ConfigError, "prompt template uses unknown placeholder '" + name + "'");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::string truncate_memory(std::string_view text, std::size_t cap)
{
    std::size_t codepoints = 0;
    for (const unsigned char c: text)
    {
        if ((c & 0xC0) != 0x80)
            ++codepoints;
    }
    if (codepoints <= cap)
        return std::string(text);

    // Drop the oldest (leading) code points.
    std::size_t drop = codepoints - cap;
    std::size_t i = 0;
    while (i < text.size())
    {
        const auto c = static_cast<unsigned char>(text[i]);
        if ((c & 0xC0) != 0x80)
        {
            if (drop == 0)
                break;
            --drop;
        }
        ++i;
    }
    return std::string(text.substr(i));
}

std::string legend_line(const env::Option& option)
{
    long degrees = std::lround(option.heading);
    if (degrees >= 360)
        degrees -= 360;
    return "Option " + option.option_id + ": facing " + std::string(geo::to_string(option.compass)) + " ("
           + std::to_string(degrees) + "°)";
}

PromptBundle build_vop_prompt(const env::Observation& obs, const sampler::NavTask& task, const AgentMemory& mem,
                              const PromptTemplates& templates)
{
    const auto lines = legend(obs);
    auto text = render_template(templates.agentnav, {
                                                        {"option_count", std::to_string(obs.options.size())},
                                                        {"destination", task.destination_name},
                                                        {"option_legend", join(lines, "\n")},
                                                        {"position", mem.position_line()},
                                                        {"memory_block", memory_block(mem)},
                                                        {"history_block", history_block(mem)},
                                                        {"previous_visits_block", previous_visits_block(mem, obs.node)},
                                                        {"response_contract", response_contract(obs, templates)},
                                                    });
    return make_bundle(obs, std::move(text), "decision");
}

PromptBundle build_base_prompt(const env::Observation& obs, const sampler::NavTask& task,
                               const PromptTemplates& templates)
{
    const auto lines = legend(obs);
    auto text = render_template(templates.base, {
                                                    {"option_count", std::to_string(obs.options.size())},
                                                    {"destination", task.destination_name},
                                                    {"option_legend", join(lines, "\n")},
                                                    {"response_contract", response_contract(obs, templates)},
                                                });
    return make_bundle(obs, std::move(text), "decision");
}

PromptBundle build_self_position_prompt(const env::Observation& obs, const sampler::NavTask& task,
                                        const AgentMemory& mem, const PromptTemplates& templates)
{
    const auto lines = legend(obs);
    auto text = render_template(templates.self_position, {
                                                             {"destination", task.destination_name},
                                                             {"option_legend", join(lines, "\n")},
                                                             {"memory_block", memory_block(mem)},
                                                         });
    return make_bundle(obs, std::move(text), "self_position");
}

} // namespace citynav::agent
