// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/errors.hpp"
#include "kstream/planner.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace kstream {

namespace {

constexpr std::uint32_t kPayloadMask = (1u << 24) - 1;

void require_range(std::uint64_t v, std::uint64_t limit, const char* field) {
    if (v > limit) throw Error(ErrorKind::InvalidArgument, std::string("command field '") + field + "' out of range");
}

const char* opcode_name(Opcode op) {
    switch (op) {
    case Opcode::LoadImg: return "LOAD_IMG";
    case Opcode::LoadWt: return "LOAD_WT";
    case Opcode::Conv: return "CONV";
    case Opcode::Pool: return "POOL";
    case Opcode::Store: return "STORE";
    case Opcode::Barrier: return "BARRIER";
    }
    return "?";
}

} // namespace

std::uint64_t Command::encode() const {
    require_range(static_cast<std::uint64_t>(tile), 0xFFF, "tile");
    require_range(static_cast<std::uint64_t>(group), 0xFF, "group");
    require_range(static_cast<std::uint64_t>(channel), 0xFFF, "channel");
    require_range(payload, kPayloadMask, "payload");
    if (tile < 0 || group < 0 || channel < 0) throw Error(ErrorKind::InvalidArgument, "negative command field");
    return (static_cast<std::uint64_t>(op) << 56) | (static_cast<std::uint64_t>(tile) << 44) |
           (static_cast<std::uint64_t>(group) << 36) | (static_cast<std::uint64_t>(channel) << 24) | payload;
}

Command Command::decode(std::uint64_t word) {
    const auto op = static_cast<std::uint8_t>(word >> 56);
    if (op < 1 || op > 6) throw Error(ErrorKind::Parse, "unknown opcode " + std::to_string(op));
    Command c;
    c.op = static_cast<Opcode>(op);
    c.tile = static_cast<int>((word >> 44) & 0xFFF);
    c.group = static_cast<int>((word >> 36) & 0xFF);
    c.channel = static_cast<int>((word >> 24) & 0xFFF);
    c.payload = static_cast<std::uint32_t>(word & kPayloadMask);
    return c;
}

std::string to_string(const Command& c) {
    std::ostringstream os;
    os << opcode_name(c.op) << " tile=" << c.tile << " group=" << c.group << " ch=";
    if (c.channel == Command::kAllChannels)
        os << "all";
    else
        os << c.channel;
    os << " payload=" << c.payload;
    return os.str();
}

std::vector<Command> emit_commands(const TilePlan& plan, const ConvLayerSpec& l) {
    if (l.in_c >= Command::kAllChannels) throw Error(ErrorKind::InvalidArgument, "too many input channels to encode");
    const auto steps = enumerate_steps(l, plan.gx, plan.gy, plan.f);
    const int groups = plan.f;

    auto words = [](std::uint64_t pixels) { return static_cast<std::uint32_t>(words_for_pixels(pixels)); };
    auto img_words = [&](const TileStep& s) {
        return words(static_cast<std::uint64_t>(s.channels.size()) * s.in.area());
    };
    auto out_words = [&](const TileStep& s) {
        return words(static_cast<std::uint64_t>(s.features.size()) * s.out.area());
    };
    const auto k2 = static_cast<std::uint64_t>(l.kernel) * static_cast<std::uint64_t>(l.kernel);
    const std::uint32_t pool_payload = l.pool ? static_cast<std::uint32_t>((l.pool->kernel << 8) | l.pool->stride) : 0;

    std::vector<Command> out;
    auto tail = [&](const TileStep& s) {
        if (l.pool) out.push_back({Opcode::Pool, s.tile_id, s.group_id, Command::kAllChannels, pool_payload});
        out.push_back({Opcode::Store, s.tile_id, s.group_id, Command::kAllChannels, out_words(s)});
    };

    if (plan.order == LoopOrder::FeaturesOuter) {
        for (int g = 0; g < groups; ++g) {
            bool first = true;
            for (const TileStep& s : steps) {
                if (s.group_id != g) continue;
                if (first) {
                    const std::uint64_t pixels = static_cast<std::uint64_t>(s.features.size()) *
                                                     static_cast<std::uint64_t>(l.channels_per_group()) * k2 +
                                                 static_cast<std::uint64_t>(s.features.size());
                    out.push_back({Opcode::LoadWt, s.tile_id, g, Command::kAllChannels, words(pixels)});
                    first = false;
                }
                out.push_back({Opcode::LoadImg, s.tile_id, g, Command::kAllChannels, img_words(s)});
                for (int ch = s.channels.begin; ch < s.channels.end; ++ch) out.push_back({Opcode::Conv, s.tile_id, g, ch, 0});
                tail(s);
            }
            if (g + 1 < groups) out.push_back({Opcode::Barrier, 0, g, Command::kAllChannels, 0});
        }
    } else {
        const int cpg = l.channels_per_group();
        for (const TileStep& s : steps) {
            out.push_back({Opcode::LoadImg, s.tile_id, s.group_id, Command::kAllChannels, img_words(s)});
            for (int ch = s.channels.begin; ch < s.channels.end; ++ch) {
                std::uint64_t feats = 0;
                for (int m = s.features.begin; m < s.features.end; ++m)
                    if (l.group_of_feature(m) == ch / cpg) ++feats;
                const std::uint64_t pixels = feats * k2 + (ch == s.channels.begin ? s.features.size() : 0);
                out.push_back({Opcode::LoadWt, s.tile_id, s.group_id, ch, words(pixels)});
                out.push_back({Opcode::Conv, s.tile_id, s.group_id, ch, 0});
            }
            tail(s);
        }
    }
    return out;
}

std::string check_dependencies(std::span<const Command> cmds, const TilePlan& plan, const ConvLayerSpec& l) {
    const int tiles = plan.gx * plan.gy;
    const int groups = plan.f;
    // Features of group g: balanced split, recomputed here from scratch.
    auto group_channels = [&](int g) {
        const int base = l.out_c / groups, extra = l.out_c % groups;
        const int m0 = g * base + std::min(g, extra);
        const int m1 = m0 + base + (g < extra ? 1 : 0);
        const int fpg = l.out_c / l.groups, cpg = l.in_c / l.groups;
        return std::pair{(m0 / fpg) * cpg, ((m1 - 1) / fpg + 1) * cpg};
    };

    struct TileState {
        bool image = false;
        bool pooled = false;
        bool stored = false;
        int slice = -1;
        std::set<int> convolved;
    };
    std::map<std::pair<int, int>, TileState> state;
    std::set<int> group_weights;
    std::optional<std::pair<int, int>> live;  // tile being computed, one at a time

    std::ostringstream err;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        const Command& c = cmds[i];
        auto fail = [&](const std::string& what) {
            err << "command " << i << " (" << to_string(c) << "): " << what;
            return err.str();
        };
        if (c.op == Opcode::Barrier) {
            group_weights.clear();
            continue;
        }
        if (c.tile >= tiles || c.group >= groups) return fail("tile or group out of range");
        const std::pair<int, int> key{c.tile, c.group};
        auto& st = state[key];
        const auto [k0, k1] = group_channels(c.group);
        const bool per_tile = c.op != Opcode::LoadImg && !(c.op == Opcode::LoadWt && c.channel == Command::kAllChannels);
        if (per_tile && live != key) return fail("tile is not the live one");

        switch (c.op) {
        case Opcode::LoadImg:
            if (st.stored) return fail("load after store");
            if (live && *live != key) return fail("LOAD_IMG while another tile is unstored");
            st.image = true;
            live = key;
            break;
        case Opcode::LoadWt:
            if (c.channel == Command::kAllChannels) {
                group_weights.insert(c.group);
            } else {
                if (c.channel < k0 || c.channel >= k1) return fail("weight slice for a channel the group does not read");
                st.slice = c.channel;
            }
            break;
        case Opcode::Conv:
            if (!st.image) return fail("CONV before LOAD_IMG");
            if (!group_weights.contains(c.group) && st.slice != c.channel) return fail("CONV before LOAD_WT");
            if (c.channel < k0 || c.channel >= k1) return fail("channel outside the group's input");
            if (!st.convolved.insert(c.channel).second) return fail("channel convolved twice");
            if (st.pooled || st.stored) return fail("CONV after POOL/STORE");
            break;
        case Opcode::Pool:
            if (!l.pool) return fail("POOL on a layer without pooling");
            if (static_cast<int>(st.convolved.size()) != k1 - k0) return fail("POOL before every channel was convolved");
            if (st.pooled) return fail("pooled twice");
            st.pooled = true;
            break;
        case Opcode::Store:
            if (static_cast<int>(st.convolved.size()) != k1 - k0) return fail("STORE before every channel was convolved");
            if (l.pool && !st.pooled) return fail("STORE before POOL");
            if (st.stored) return fail("stored twice");
            st.stored = true;
            st.image = false;
            live.reset();
            break;
        case Opcode::Barrier: break;
        }
    }
    for (int t = 0; t < tiles; ++t)
        for (int g = 0; g < groups; ++g)
            if (!state[{t, g}].stored) {
                err << "tile " << t << " group " << g << " never stored";
                return err.str();
            }
    return {};
}

void store_commands(std::span<const Command> cmds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    std::vector<std::uint8_t> bytes{'K', 'C', 'M', 'D'};
    const auto n = static_cast<std::uint32_t>(cmds.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
    for (const Command& c : cmds) {
        const std::uint64_t w = c.encode();
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

std::vector<Command> load_commands(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (b.size() < 8 || b[0] != 'K' || b[1] != 'C' || b[2] != 'M' || b[3] != 'D') throw IoError("bad command file magic");
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(b[4 + i]) << (8 * i);
    if (b.size() != 8 + static_cast<std::size_t>(n) * 8) throw IoError("command file length mismatch");
    std::vector<Command> out;
    out.reserve(n);
    for (std::uint32_t k = 0; k < n; ++k) {
        std::uint64_t w = 0;
        for (int i = 0; i < 8; ++i) w |= static_cast<std::uint64_t>(b[8 + k * 8 + i]) << (8 * i);
        out.push_back(Command::decode(w));
    }
    return out;
}

// ---------------------------------------------------------------------------

CommandFifo::CommandFifo(std::span<const Command> program) : program_(program) { refill(); }

void CommandFifo::refill() {
    if (next_ >= program_.size()) return;
    std::size_t added = 0;
    while (queue_.size() < kDepth && next_ < program_.size()) {
        queue_.push_back(program_[next_++]);
        ++added;
    }
    fetched_ += added;
    ++refills_;
    max_seen_ = std::max(max_seen_, queue_.size());
}

Command CommandFifo::pop() {
    if (queue_.empty()) refill();
    if (queue_.empty()) throw SimulationFault("command FIFO underflow");
    Command c = queue_.front();
    queue_.pop_front();
    if (queue_.size() < kLowWater) refill();
    return c;
}

Sequencer::Sequencer(Accelerator& acc, const ConvLayerSpec& l, const TilePlan& plan)
    : acc_(acc), layer_(l), plan_(plan), steps_(enumerate_steps(l, plan.gx, plan.gy, plan.f)) {}

const TileStep& Sequencer::step_for(int tile, int group) const {
    const auto idx = static_cast<std::size_t>(tile) * static_cast<std::size_t>(plan_.f) + static_cast<std::size_t>(group);
    if (tile < 0 || group < 0 || group >= plan_.f || idx >= steps_.size()) {
        throw SimulationFault("command addresses tile " + std::to_string(tile) + " group " + std::to_string(group) +
                              " outside the plan");
    }
    return steps_[idx];
}

void Sequencer::execute(std::span<const Command> program, const Tensor3D& input, const FilterSet& filters,
                        Tensor3D& output) {
    const WeightResidency residency =
        plan_.order == LoopOrder::FeaturesOuter ? WeightResidency::Group : WeightResidency::Channel;
    CommandFifo fifo(program);
    std::uint64_t fetched = 0;
    bool configured = false;

    auto ensure_step = [&](const TileStep& s) {
        if (!configured || acc_.step() != s) {
            acc_.configure_layer(layer_, s, residency);
            configured = true;
        }
    };
    auto require_step = [&](const TileStep& s) {
        if (!configured || acc_.step() != s) throw SimulationFault("command for a tile that is not resident");
    };

    while (!fifo.empty()) {
        const Command c = fifo.pop();
        if (fifo.size() > CommandFifo::kDepth) throw SimulationFault("command FIFO overflow");
        acc_.add_command_fetch(fifo.fetched() - fetched);
        fetched = fifo.fetched();
        acc_.count_command();

        switch (c.op) {
        case Opcode::LoadWt: {
            const TileStep& s = step_for(c.tile, c.group);
            if (c.channel == Command::kAllChannels) {
                ensure_step(s);
                acc_.load_weights(filters, std::nullopt);
            } else {
                require_step(s);
                acc_.load_weights(filters, c.channel);
            }
            break;
        }
        case Opcode::LoadImg: {
            const TileStep& s = step_for(c.tile, c.group);
            ensure_step(s);
            acc_.load_input(input);
            break;
        }
        case Opcode::Conv:
            require_step(step_for(c.tile, c.group));
            acc_.conv_channel(c.channel);
            break;
        case Opcode::Pool:
            require_step(step_for(c.tile, c.group));
            acc_.writeback(true);
            break;
        case Opcode::Store:
            require_step(step_for(c.tile, c.group));
            acc_.store_output(output);
            break;
        case Opcode::Barrier:
            acc_.release_weights();
            configured = false;
            break;
        }
    }
    acc_.release_weights();
}

LayerRun execute_layer(const ConvLayerSpec& l, const TilePlan& plan, const Tensor3D& input, const FilterSet& filters,
                       const DatapathConfig& cfg) {
    filters.check_matches(l);
    Accelerator acc(cfg);
    const Dims3 fd = final_dims(l);
    LayerRun run;
    run.plan = plan;
    run.output = Tensor3D(fd.c, fd.h, fd.w);
    const auto program = emit_commands(plan, l);
    Sequencer seq(acc, l, plan);
    seq.execute(program, input, filters, run.output);
    run.counters = acc.counters();
    run.commands = program.size();
    return run;
}

} // namespace kstream
