#include "olfact/types.hpp"

#include <cmath>

#include "olfact/util.hpp"

namespace olfact {

const char* category_name(Category c) {
    switch (c) {
        case Category::nuts: return "nuts";
        case Category::spices: return "spices";
        case Category::herbs: return "herbs";
        case Category::fruits: return "fruits";
        case Category::vegetables: return "vegetables";
    }
    return "?";
}

Category category_from_name(const std::string& name) {
    for (int i = 0; i < static_cast<int>(kNumCategories); ++i) {
        auto c = static_cast<Category>(i);
        if (name == category_name(c)) return c;
    }
    throw DataError(cat("unknown category '", name, "'"));
}

const char* split_tag_name(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::test_seen: return "test-seen";
        case SplitTag::test_unseen: return "test-unseen";
    }
    return "?";
}

MixtureTarget make_mixture_target(const std::vector<double>& raw, int max_present) {
    if (raw.size() != kMixtureDim)
        throw DataError(cat("invalid mixture target: expected ", kMixtureDim,
                            " components, got ", raw.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw[i]))
            throw DataError(cat("invalid mixture target: non-finite component ", i));
        if (raw[i] < 0.0)
            throw DataError(cat("invalid mixture target: negative component ", i));
        total += raw[i];
    }
    if (total <= 0.0) throw DataError("invalid mixture target: all components zero");

    MixtureTarget t;
    t.proportions.resize(kMixtureDim);
    t.presence.resize(kMixtureDim);
    for (std::size_t i = 0; i < kMixtureDim; ++i) {
        t.proportions[i] = raw[i] / total;
        t.presence[i] = raw[i] > 0.0 ? 1 : 0;
        t.num_present += t.presence[i];
    }
    if (t.num_present > max_present)
        throw DataError(cat("invalid mixture target: ", t.num_present,
                            " components present, at most ", max_present, " allowed"));
    return t;
}

int ChannelSchema::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i] == name) return static_cast<int>(i);
    return -1;
}

ChannelSchema base_schema() {
    return ChannelSchema{{"NO2", "C2H5OH", "VOC", "CO", "Alcohol", "LPG"}, 1.0};
}

ChannelSchema mixture_schema() {
    return ChannelSchema{{"NO2", "C2H5OH", "VOC", "CO"}, 10.0};
}

void validate_session(const SensorSession& s) {
    const std::size_t d = s.schema.num_channels();
    if (d == 0) throw DataError(cat("session ", s.session_id, ": empty channel schema"));
    if (s.num_steps < 1) throw DataError(cat("session ", s.session_id, ": no readings"));
    if (s.readings.size() != s.num_steps * d)
        throw DataError(cat("session ", s.session_id, ": readings size ", s.readings.size(),
                            " does not match ", s.num_steps, "x", d));
    for (double v : s.readings)
        if (!std::isfinite(v))
            throw DataError(cat("session ", s.session_id, ": non-finite reading"));
}

}  // namespace olfact
