#include "comve/synthetic.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <random>

namespace comve {

SyntheticVocabSpec SyntheticVocabSpec::defaults() {
    SyntheticVocabSpec spec;
    spec.subjects = {"he",           "she",         "the boy",   "my mother", "the farmer",
                     "the teacher",  "our neighbor", "the child", "the doctor", "my friend"};
    spec.frames = {
        {"drinks", "drinkable", {"water", "milk", "juice", "tea", "soup", "lemonade"}},
        {"eats", "edible", {"bread", "apples", "rice", "noodles", "cheese", "carrots"}},
        {"reads", "readable", {"books", "newspapers", "letters", "novels", "magazines", "comics"}},
        {"drives", "drivable", {"cars", "buses", "trucks", "tractors", "vans", "taxis"}},
        {"wears", "wearable", {"coats", "hats", "boots", "gloves", "scarves", "jackets"}},
        {"plants", "plantable", {"trees", "flowers", "seeds", "tomatoes", "potatoes", "roses"}},
    };
    spec.absurd_objects = {"stones", "bricks",  "clouds",  "nails",  "mountains", "thunderstorms",
                           "chairs", "rainbows", "lamps",  "shadows", "pianos",   "volcanoes"};
    spec.settings = {"every morning", "after work", "at the weekend", "in the kitchen",
                     "before dinner", "in the evening", "on holiday", "with a smile"};
    return spec;
}

ExampleSet SyntheticCorpus::task_set(Task task) const {
    ExampleSet set;
    set.task = task;
    if (task == Task::A) {
        set.validation = validation;
    } else {
        set.explanation = explanation;
    }
    return set;
}

namespace {

// Modulo draws and a hand-rolled shuffle keep the corpus identical across
// standard library implementations.
std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
    return items[draw(rng, items.size())];
}

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[draw(rng, i)]);
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t n_classes, std::mt19937_64& rng) {
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % n_classes;
    shuffle(labels, rng);
    return labels;
}

std::string sentence(const std::string& subject, const std::string& verb, const std::string& object,
                     const std::string& setting) {
    auto text = fmt::format("{} {} {} {}.", subject, verb, object, setting);
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    return text;
}

std::string capitalized(std::string text) {
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    return text;
}

} // namespace

SyntheticCorpus generate_synthetic(std::uint64_t seed, std::size_t n_examples, const SyntheticVocabSpec& spec) {
    std::mt19937_64 rng(seed);
    SyntheticCorpus corpus;

    const auto labels_a = balanced_labels(n_examples, 2, rng);
    for (std::size_t i = 0; i < n_examples; ++i) {
        const auto& subject = pick(rng, spec.subjects);
        const auto& frame = pick(rng, spec.frames);
        const auto& fitting = pick(rng, frame.fitting_objects);
        const auto& absurd = pick(rng, spec.absurd_objects);
        const auto& setting = pick(rng, spec.settings);
        auto sensible = sentence(subject, frame.verb, fitting, setting);
        auto nonsense = sentence(subject, frame.verb, absurd, setting);
        ValidationExample ex{fmt::format("{}", i + 1), {}, {}, labels_a[i]};
        ex.sent0 = labels_a[i] == 0 ? nonsense : sensible;
        ex.sent1 = labels_a[i] == 0 ? sensible : nonsense;
        corpus.validation.push_back(std::move(ex));
    }

    const auto labels_b = balanced_labels(n_examples, 3, rng);
    for (std::size_t i = 0; i < n_examples; ++i) {
        const auto& subject = pick(rng, spec.subjects);
        const auto& frame = pick(rng, spec.frames);
        const auto& fitting = pick(rng, frame.fitting_objects);
        const auto& absurd = pick(rng, spec.absurd_objects);
        const auto& setting = pick(rng, spec.settings);
        const auto& other_frame = pick(rng, spec.frames);
        const auto& liked = pick(rng, other_frame.fitting_objects);

        std::vector<std::string> distractors{capitalized(fmt::format("{} are {}.", fitting, frame.property)),
                                             capitalized(fmt::format("{} likes {}.", subject, liked))};
        shuffle(distractors, rng);

        ExplanationExample ex;
        ex.id = fmt::format("{}", i + 1);
        ex.false_sent = sentence(subject, frame.verb, absurd, setting);
        ex.label = labels_b[i];
        std::size_t next = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            ex.options[k] = k == ex.label ? capitalized(fmt::format("{} are not {}.", absurd, frame.property))
                                          : distractors[next++];
        }
        corpus.explanation.push_back(std::move(ex));
    }
    return corpus;
}

std::pair<SyntheticCorpus, SyntheticCorpus> split_corpus(const SyntheticCorpus& corpus, std::size_t n_train) {
    SyntheticCorpus train, dev;
    const auto cut_a = std::min(n_train, corpus.validation.size());
    const auto cut_b = std::min(n_train, corpus.explanation.size());
    train.validation.assign(corpus.validation.begin(), corpus.validation.begin() + static_cast<std::ptrdiff_t>(cut_a));
    dev.validation.assign(corpus.validation.begin() + static_cast<std::ptrdiff_t>(cut_a), corpus.validation.end());
    train.explanation.assign(corpus.explanation.begin(),
                             corpus.explanation.begin() + static_cast<std::ptrdiff_t>(cut_b));
    dev.explanation.assign(corpus.explanation.begin() + static_cast<std::ptrdiff_t>(cut_b), corpus.explanation.end());
    return {std::move(train), std::move(dev)};
}

} // namespace comve
