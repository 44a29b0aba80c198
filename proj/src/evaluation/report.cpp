#include "hazard/evaluation/report.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hazard::eval {

namespace {

std::string fixed1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto tab = line.find('\t', pos);
        out.push_back(line.substr(pos, tab - pos));
        if (tab == std::string::npos) break;
        pos = tab + 1;
    }
    return out;
}

void check_field(const std::string& s) {
    if (s.find_first_of("\t\n") != std::string::npos) throw std::invalid_argument("report field contains tab or newline");
}

}  // namespace

Report emit_report(const ReportBundle& bundle) {
    std::ostringstream md;
    std::ostringstream tsv;
    check_field(bundle.title);
    tsv << "section\tkey\tname\tvalue\n";
    tsv << "title\t-\t-\t" << bundle.title << "\n";
    md << "# " << bundle.title << "\n\n";

    md << "## Configuration\n\n";
    if (bundle.config_hashes.empty()) {
        md << "No configuration recorded.\n\n";
    } else {
        md << "| Stage | Config SHA-256 |\n|---|---|\n";
        for (const auto& [stage, hash] : bundle.config_hashes) {
            check_field(stage);
            check_field(hash);
            md << "| " << stage << " | `" << hash << "` |\n";
            tsv << "config\t" << stage << "\tsha256\t" << hash << "\n";
        }
        md << "\n";
    }

    md << "## Retrieval\n\n";
    if (bundle.retrieval.empty()) {
        md << "Not run.\n\n";
    } else {
        std::vector<int> ks;
        for (const auto& [k, v] : bundle.retrieval.front().metrics.recall_at) ks.push_back(k);
        md << "| Model | Direction | Mean rank |";
        for (int k : ks) md << " R@" << k << " (%) |";
        md << "\n|---|---|---|";
        for (std::size_t i = 0; i < ks.size(); ++i) md << "---|";
        md << "\n";
        for (const auto& r : bundle.retrieval) {
            check_field(r.model);
            const std::string key = r.model + "/" + std::string(to_string(r.direction));
            md << "| " << r.model << " | " << to_string(r.direction) << " | " << fixed1(r.metrics.mean_rank) << " |";
            for (int k : ks) {
                const auto it = r.metrics.recall_at.find(k);
                md << " " << (it == r.metrics.recall_at.end() ? "-" : fixed1(100.0 * it->second)) << " |";
            }
            md << "\n";
            tsv << "retrieval\t" << key << "\tmean_rank\t" << exact(r.metrics.mean_rank) << "\n";
            for (const auto& [k, v] : r.metrics.recall_at) {
                tsv << "retrieval\t" << key << "\trecall@" << k << "\t" << exact(v) << "\n";
            }
        }
        md << "\n";
    }

    md << "## Generation\n\n";
    if (bundle.generation.empty()) {
        md << "Not run.\n\n";
    } else {
        md << "| Model | BLEU-4 | ROUGE-L | CIDEr-D | SPIDEr | LLM judge |\n|---|---|---|---|---|---|\n";
        for (const auto& g : bundle.generation) {
            check_field(g.model);
            md << "| " << g.model << " | " << fixed1(g.captions.bleu4) << " | " << fixed1(g.captions.rouge_l) << " | "
               << fixed1(g.captions.cider_d) << " | " << (g.captions.spider ? fixed1(*g.captions.spider) : "-")
               << " | " << (g.judge_mean ? fixed1(*g.judge_mean) : "-") << " |\n";
            const std::string p = "generation\t" + g.model + "\t";
            tsv << p << "bleu4\t" << exact(g.captions.bleu4) << "\n";
            tsv << p << "rouge_l\t" << exact(g.captions.rouge_l) << "\n";
            tsv << p << "cider_d\t" << exact(g.captions.cider_d) << "\n";
            if (g.captions.spice) tsv << p << "spice\t" << exact(*g.captions.spice) << "\n";
            if (g.captions.spider) tsv << p << "spider\t" << exact(*g.captions.spider) << "\n";
            if (!g.captions.note.empty()) {
                check_field(g.captions.note);
                tsv << p << "caption_note\t" << g.captions.note << "\n";
            }
            if (g.judge_mean) tsv << p << "judge_mean\t" << exact(*g.judge_mean) << "\n";
            tsv << p << "judge_scored\t" << g.judge_scored << "\n";
            tsv << p << "judge_failed_batches\t" << g.judge_failed_batches << "\n";
        }
        md << "\n";
        for (const auto& g : bundle.generation) {
            if (!g.captions.note.empty()) md << "- " << g.model << ": " << g.captions.note << "\n";
            if (g.judge_failed_batches > 0) {
                md << "- " << g.model << ": " << g.judge_failed_batches << " judge batch(es) failed; the judge mean covers "
                   << g.judge_scored << " scored pairs\n";
            }
        }
        md << "\n";
    }

    if (!bundle.notes.empty()) {
        md << "## Notes\n\n";
        for (const auto& n : bundle.notes) {
            check_field(n);
            md << "- " << n << "\n";
            tsv << "note\t-\t-\t" << n << "\n";
        }
        md << "\n";
    }
    return {md.str(), tsv.str()};
}

ReportBundle parse_report_tsv(std::string_view text) {
    ReportBundle b;
    b.title.clear();
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != "section\tkey\tname\tvalue") throw std::runtime_error("not a report TSV");
    std::map<std::string, std::size_t> retrieval_index;
    std::map<std::string, std::size_t> generation_index;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 4) throw std::runtime_error("report TSV row needs 4 fields: " + line);
        const auto& [section, key, name, value] = std::tie(f[0], f[1], f[2], f[3]);
        if (section == "title") {
            b.title = value;
        } else if (section == "config") {
            b.config_hashes[key] = value;
        } else if (section == "note") {
            b.notes.push_back(value);
        } else if (section == "retrieval") {
            auto [it, fresh] = retrieval_index.try_emplace(key, b.retrieval.size());
            if (fresh) {
                const auto slash = key.rfind('/');
                if (slash == std::string::npos) throw std::runtime_error("bad retrieval key " + key);
                b.retrieval.push_back({key.substr(0, slash), parse_direction(key.substr(slash + 1)), {}});
            }
            auto& m = b.retrieval[it->second].metrics;
            if (name == "mean_rank") {
                m.mean_rank = std::stod(value);
            } else if (name.starts_with("recall@")) {
                m.recall_at[std::stoi(name.substr(7))] = std::stod(value);
            } else {
                throw std::runtime_error("unknown retrieval metric " + name);
            }
        } else if (section == "generation") {
            auto [it, fresh] = generation_index.try_emplace(key, b.generation.size());
            if (fresh) b.generation.push_back({key, {}, std::nullopt, 0, 0});
            auto& g = b.generation[it->second];
            if (name == "bleu4") g.captions.bleu4 = std::stod(value);
            else if (name == "rouge_l") g.captions.rouge_l = std::stod(value);
            else if (name == "cider_d") g.captions.cider_d = std::stod(value);
            else if (name == "spice") g.captions.spice = std::stod(value);
            else if (name == "spider") g.captions.spider = std::stod(value);
            else if (name == "caption_note") g.captions.note = value;
            else if (name == "judge_mean") g.judge_mean = std::stod(value);
            else if (name == "judge_scored") g.judge_scored = std::stoi(value);
            else if (name == "judge_failed_batches") g.judge_failed_batches = std::stoi(value);
            else throw std::runtime_error("unknown generation metric " + name);
        } else {
            throw std::runtime_error("unknown report section " + section);
        }
    }
    return b;
}

}  // namespace hazard::eval
