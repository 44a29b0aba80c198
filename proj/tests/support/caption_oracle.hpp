#pragma once

#include <string>
#include <utility>
#include <vector>

namespace hazard::testing {

// Twenty (prediction, reference) pairs with frozen scores from independent
// implementations: nltk corpus_bleu and the coco-caption CIDEr scorer.
inline const std::vector<std::pair<std::string, std::string>> kCaptionPairs = {
    {"#2 and left #3 and brakes stops and stops the turn lane and", "#2 and left truck #3 and brakes stops into stops the turn hard lane and"},
    {"into stops stops suddenly into crosses #1 #3 brakes car", "into stops and suddenly into lane #1 turn #3 brakes car"},
    {"pedestrian brakes brakes pedestrian i left #3 brakes hard into car and", "pedestrian brakes brakes pedestrian left #3 brakes hard #3 car and"},
    {"right entity pedestrian lane right stops hard hard suddenly pedestrian #1 into crosses while", "right entity pedestrian lane right stops hard hard suddenly crosses #1 #3 crosses while"},
    {"#2 #3 into into stops #1 pedestrian #3 left merges hits entity #2 my #1 suddenly", "#2 merges into stops #1 pedestrian #3 left merges hits entity #2 my #1 suddenly"},
    {"right the while road brakes merges brakes hits truck truck the #1 left hard", "right the while i brakes merges brakes #3 hits truck truck the #1 left merges"},
    {"crosses stops #3 car left merges turn road and hits and lane hits entity", "crosses stops into car left merges turn road and and lane hits entity"},
    {"#2 hard while left and #2 #2 hits #1 right right turn right lane my", "#2 hard while left and #2 #2 hits #1 right entity right turn right lane my"},
    {"entity the my entity lane right", "entity the my #2 car entity lane right"},
    {"the and truck suddenly lane suddenly into #3 road left suddenly brakes #2 into", "the and suddenly lane suddenly into #3 road left suddenly brakes right into"},
    {"suddenly merges my entity pedestrian merges my turn hard stops i brakes merges", "suddenly merges my entity pedestrian merges my stops hard stops i brakes merges"},
    {"turn car brakes pedestrian my pedestrian turn the merges and #2 hard pedestrian the", "turn car brakes pedestrian my i pedestrian turn the merges and #2 hard right entity"},
    {"brakes while right pedestrian #2 car my entity entity crosses brakes lane #2 i into", "brakes while right pedestrian #2 car stops entity entity crosses brakes lane #2 i into"},
    {"i hard entity turn left #1 turn left left entity brakes entity", "hard entity pedestrian turn left #1 #3 left left entity brakes entity"},
    {"suddenly left #2 pedestrian turn stops truck the left crosses suddenly lane suddenly", "suddenly left #2 lane hard turn stops truck the left crosses suddenly lane entity"},
    {"truck merges suddenly turn car the road lane #3", "truck merges merges #3 suddenly lane turn car the road lane #3"},
    {"right hard entity while suddenly right the truck hard lane i", "i hard suddenly right the truck hard lane i"},
    {"right pedestrian #3 stops hits stops left the car lane stops while brakes merges i", "right pedestrian #3 stops hits stops left the car lane stops the merges i"},
    {"hits suddenly into #2 entity left the #1 and road left lane entity", "hits suddenly entity entity left the #1 and road left lane entity"},
    {"merges entity #1 pedestrian brakes pedestrian lane into #1 the stops hard the right", "merges entity #1 pedestrian brakes pedestrian lane into pedestrian turn stops hard my right"},
};

inline constexpr double kCaptionPairsBleu4 = 63.828657;
inline constexpr double kCaptionPairsCiderD = 623.516611;
inline constexpr double kSinglePairBleu4 = 81.873075;  // "my car hits Entity #1" vs "... hard"

}  // namespace hazard::testing
