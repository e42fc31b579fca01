// SPDX-License-Identifier: Apache-2.0
//
// Embedded prompt template texts. Do not reflow or "fix" wording, spacing or
// punctuation in the non-supplemental strings: they are golden content that
// tests compare byte-for-byte (including the typographic apostrophe in the
// seventh generation prompt and the missing space in "water.Bottle").

#include "realign/prompts.hpp"

namespace realign::detail {

namespace {

PromptTemplate raw_gen(int n, std::string text) {
    PromptTemplate t;
    t.template_id = "RawGen" + std::to_string(n);
    t.placeholders = {"image", "object", "boxes"};
    t.user_format = std::move(text);
    return t;
}

} // namespace

std::map<std::string, PromptTemplate> builtin_templates() {
    std::map<std::string, PromptTemplate> all;

    auto add = [&all](PromptTemplate t) { all.emplace(t.template_id, std::move(t)); };

    add(raw_gen(1,
        "For the given image <image>, please provide a unique description for the <object> in the area <boxes>."));
    add(raw_gen(2,
        "What is the content depicted of the <object> located in the area <boxes> of the image <image>?"));
    add(raw_gen(3, "Please describe the <object> in the area <boxes> of this image <image>."));
    add(raw_gen(4,
        "I would like to know the description of the <object> in the area <boxes> of the picture <image>."));
    add(raw_gen(5, "Kindly describe the <object> in the area <boxes> of the picture <image>."));
    add(raw_gen(6,
        "Give me detailed descriptions of the <object> in area <boxes> of this image <image>, including its color, material, attribute, etc."));
    add(raw_gen(7,
        "What’s the difference between <object> in area <boxes> and other <object> in this image <image>?"));
    add(raw_gen(8,
        "What is the relative position of the <object> in area <boxes> of the picture <image>?"));
    add(raw_gen(9,
        "What's the relationship of <object> in area <boxes> with its' surrounding objects?"));

    {
        PromptTemplate t;
        t.template_id = "Synonym";
        t.system_text =
            "I want you to act as a synonymous expression provider. I will give you a text of phrase or short sentence, which is an expression that describes a main object while mentioning some other objects. And you will reply to me with a new expression that has the same semantic meaning and describes the same main object as the provided expression. The new expressions should also be phrases or short sentences no longer than 25 words. Do not write explanations on replies. Do not repeat.";
        t.placeholders = {"expression"};
        t.user_format = "<expression>";
        add(std::move(t));
    }

    {
        PromptTemplate t;
        t.template_id = "Rewrite";
        t.system_text = R"PT(You are an excellent text analyst and generator. I want a short text description that correctly describes my chosen object in an image. Now I already have one description, but there might be mistakes in it, and I want you to help with this. I will provide you with the following as background knowledge:
1. Image Caption: a caption describing the content in an image.
2. Chosen Object: one or more objects chosen in this image to describe and their corresponding coordinates. The top-left corner of the image has coordinates [0, 0] and the bottom-right corner has coordinates [1, 1]. Each object is represented as {"id": unique object identification, 'category name': object category, 'box':[top-left x, top-left y, box width, box height]}.
3. Other Object: other objects in image and their corresponding coordinates, which are provided to you in the same format as the 'Chosen Object'.
4. Object Description: a short text for you to analyze (this description could be correct, partially correct or wrong).

As an assistant, analyze the 'Object Description' and generate a 'New Description' based on it, which correctly describes the chosen object:
1. Your new description should be centered on the chosen object, and describe the correct object category
2. Your new description should be consistent with information provided by the given caption and with general knowledge
3. Your new description should be a short phrase and has reasonable meaning)PT";
        t.examples.push_back(InContextExample{
            R"PT(Image Caption: The image showcases a clean and well-organized kitchen with wooden floors and wooden cabinets. The kitchen features a white refrigerator, a sink with a window above it, and a stove with an oven below it. Additionally, there is a dishwasher and a washing machine in the kitchen. The appliances are neatly arranged, and the overall appearance of the kitchen is tidy and inviting.
Chosen Object: [{'id':0, 'category name':'Home appliance', 'box':[0.68, 0.52, 0.15, 0.05]}, {'id':1, 'category name':'Home appliance', 'box':[0.0, 0.26, 0.24, 0.74]}, {'id':2, 'category name':'Home appliance', 'box':[0.53, 0.56, 0.14, 0.28]}, {'id':3, 'category name':'Home appliance', 'box':[0.68, 0.22, 0.15, 0.06]}, {'id':4, 'category name':'Home appliance', 'box':[0.67, 0.57, 0.16, 0.21]}]
Other Object: []
Object Description: 'appliance for cleaning dishes with water and detergent')PT",
            R"PT(Reasoning: The description is centered on home appliances, but it only refers to the washing machine in the kitchen, which is only one of the chosen objects. The object category is 'home appliance', which also includes the refrigerator, the sink and the stove mentioned in the given caption. So the description does not match all the objects that belong to 'home appliance' in the image. I can rewrite this description into a more specific one.
New Description: 'home appliances of refrigerator, sink, stove, dishwasher and washing machine')PT",
            false});
        t.examples.push_back(InContextExample{
            R"PT(Image Caption: The image shows a quiet park with a paved walkway, green lawns, and several tall trees. A wooden bench sits beside the walkway, and a black lamp post stands behind it. A small dog is resting under the bench.
Chosen Object: [{'id':0, 'category name':'Bench', 'box':[0.35, 0.55, 0.3, 0.2]}]
Other Object: [{'id':1, 'category name':'Street light', 'box':[0.62, 0.2, 0.08, 0.5]}, {'id':2, 'category name':'Dog', 'box':[0.42, 0.68, 0.12, 0.1]}]
Object Description: 'a metal chair placed in a garden')PT",
            R"PT(Reasoning: The description calls the object a metal chair, but the chosen object category is 'Bench' and the caption describes a wooden bench beside the walkway. The material and the category are both inconsistent with the caption. I can rewrite the description to match the bench.
New Description: 'a wooden bench beside the park walkway')PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Image Caption: The image depicts a bright kitchen counter with a ceramic bowl full of fruit. The bowl contains green apples and bananas. Next to the bowl there is a silver kettle and a folded towel.
Chosen Object: [{'id':0, 'category name':'Bowl', 'box':[0.3, 0.45, 0.25, 0.2]}]
Other Object: [{'id':1, 'category name':'Kettle', 'box':[0.6, 0.4, 0.15, 0.25]}]
Object Description: 'a bowl of red apples')PT",
            R"PT(Reasoning: The description is centered on the bowl, which matches the chosen object category. However, the caption states the bowl contains green apples and bananas, so the color of the apples conflicts with the caption. I can rewrite the description to be consistent with the caption.
New Description: 'a ceramic bowl filled with green apples and bananas')PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Image Caption: The image captures a city street on a rainy day. A yellow bus is stopped at a bus stop while several people with umbrellas wait on the sidewalk. Cars are parked along the opposite side of the street.
Chosen Object: [{'id':0, 'category name':'Bus', 'box':[0.1, 0.3, 0.45, 0.35]}]
Other Object: [{'id':1, 'category name':'Car', 'box':[0.65, 0.45, 0.2, 0.15]}]
Object Description: 'a yellow taxi driving fast on the highway')PT",
            R"PT(Reasoning: The description mentions a yellow taxi on a highway, but the chosen object category is 'Bus' and the caption describes a yellow bus stopped at a bus stop on a city street. The category and the setting are wrong. I can rewrite the description around the bus.
New Description: 'a yellow bus stopped at a city bus stop')PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Image Caption: The image shows a tidy office desk near a window. On the desk there are an open silver laptop, a white coffee mug, and a potted plant. Sunlight comes in from the window on the left.
Chosen Object: [{'id':0, 'category name':'Laptop', 'box':[0.4, 0.5, 0.3, 0.25]}]
Other Object: [{'id':1, 'category name':'Cup', 'box':[0.25, 0.6, 0.08, 0.1]}]
Object Description: 'an open laptop')PT",
            R"PT(Reasoning: The description refers to an open laptop, which matches the chosen object category and the caption. It is correct but very short, and the caption provides the color of the laptop, so the description can be more specific while staying consistent.
New Description: 'an open silver laptop on the office desk')PT",
            true});
        t.placeholders = {"caption", "chosen_object", "other_object", "object_description"};
        t.user_format =
            "Image caption: <caption>\nChosen Object: <chosen_object>\nOther Object: <other_object>\nObject Description: <object_description>\n";
        add(std::move(t));
    }

    {
        PromptTemplate t;
        t.template_id = "Reflection";
        t.system_text = R"PT(You are an excellent text analyst. I want to get correct descriptions of a target object in an image. Now I already have a phrase describing this target object, but the texts might contain mistakes and I want you to help with this.
I will provide you with this phrase to be checked, along with an 'Object Category' and a 'Caption' as reference information:
1. Object Category: the exact category name of my target object.
2. Caption: a long text describing content in the image, information provided in this caption is correct. Note that some details in the image might be missing in this caption.
Given the reference information, your task is to verify if the phrase correctly describes my target object.

## Process Instruction
1. Correct phrase: If the phrase describes the target category and provides similar information that can be found in the caption, this phrase is correct.
2. Uncertain phrase: If the phrase describes the target category but provides information that is missing in the caption, this phrase is uncertain. Please tell me what information in this phrase is not mentioned in the given caption. Extra information could be object color, object material, object location in the image, object action, object relation with other objects in the image, etc.
3. Wrong phrase: If the phrase describes a different object category, or the phrase provides information that conflicts with the caption, this phrase is wrong.)PT";
        t.examples.push_back(InContextExample{
            R"PT(Object Category: Laptop
Caption: In the image, there are two women sitting at a table, both focused on their laptops. One of the women is holding up her middle finger, possibly as a gesture of defiance or humor. On the table, there is a bottle, a cup, and a laptop being used by one of the women. The woman with the laptop is wearing a scarf, and the other woman is positioned on the other side of the table. Drink: A clear plastic bottle of water is on the table. It is placed in front of the woman with the laptop. Laptop: The laptop is a black and silver Dell computer. The woman is using it while sitting at the table. Table: The table is a dining table where the woman is sitting with her laptop and a bottle of water.Bottle: The bottle is a clear plastic bottle of water. It is placed on the table in front of the woman with the laptop.
Phrase: 'black and silver Dell computer')PT",
            R"PT(Feedback: The phrase describes a computer and provides its color and brand. 'Computer' is similar with 'Laptop' and the caption claims the laptop in the image to be a black and silver Dell computer, this phrase is correctly describing the target object.)PT",
            false});
        t.examples.push_back(InContextExample{
            R"PT(Object Category: Bench
Caption: The image shows a quiet park with a paved walkway and green lawns. A wooden bench sits beside the walkway, and a black lamp post stands behind it.
Phrase: 'a wooden bench beside the walkway')PT",
            R"PT(Feedback: The phrase describes a bench and mentions its wooden material and its position beside the walkway. Both details can be found in the caption, so this phrase is correctly describing the target object.)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Object Category: Bowl
Caption: The image depicts a bright kitchen counter with a ceramic bowl full of fruit. Next to the bowl there is a silver kettle and a folded towel.
Phrase: 'a blue bowl full of fruit')PT",
            R"PT(Feedback: The phrase describes the target category of 'bowl' and claims that the bowl is blue. The caption confirms the bowl is full of fruit but does not mention the color of the bowl, so this phrase is uncertain. The color of the bowl is not mentioned in the given caption.)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Object Category: Bus
Caption: The image captures a city street on a rainy day. A yellow bus is stopped at a bus stop while several people with umbrellas wait on the sidewalk.
Phrase: 'a red truck parked by the sidewalk')PT",
            R"PT(Feedback: The phrase describes a truck, but the target category is 'Bus' and the caption describes a yellow bus stopped at a bus stop. The phrase describes a different object category, so this phrase is wrong.)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Object Category: Laptop
Caption: The image shows a tidy office desk near a window. On the desk there are an open silver laptop, a white coffee mug, and a potted plant.
Phrase: 'a silver laptop sitting open on the desk')PT",
            R"PT(Feedback: The phrase describes the target category of 'laptop' and provides its color and its open state on the desk. The caption mentions an open silver laptop on the desk, so this phrase is correctly describing the target object.)PT",
            true});
        t.placeholders = {"category", "caption", "phrase"};
        t.user_format = "Object Category: <category>\nCaption: <caption>\nPhrase: <phrase>\n";
        add(std::move(t));
    }

    {
        PromptTemplate t;
        t.template_id = "FinetuneQuestionGen";
        t.system_text = R"PT(You are an excellent text analyst.
I have a phrase that describes an object in an image. I have already analyzed this phrase based on a caption. And I have reached the conclusion that this phrase is uncertain. I want you to help me generate questions asking about the missing information in the caption.
I will provide you with my statement of the reason why the phrase is uncertain. As an assistant, please analyze my statement and respond with your generated questions. Ask about the object in the image only. Do not involve the caption in your questions. Ask as few questions as possible.)PT";
        t.examples.push_back(InContextExample{
            R"PT(Phrase: "a book with the word 'Fix' on it"
Reasoning: The phrase "a book with the word 'Fix' on it" describes the target category of 'book' and provides extra information that the word "Fix" is on the book. However, the caption does not mention any specific word on the book, so extra information is needed to determine if the phrase is correct.
Conclusion: The phrase is uncertain. The caption does not mention any specific word on the book, so it is unclear if the phrase is correct or not.)PT",
            R"PT(Questions:
1. Is there any specific word on the book? If so, what is the word on the book?)PT",
            false});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'a blue bowl full of fruit'
Reasoning: The phrase describes the target category of 'bowl' and claims the bowl is blue. The caption confirms the bowl is full of fruit but does not mention its color, so extra information is needed.
Conclusion: The phrase is uncertain. The color of the bowl is not mentioned in the caption.)PT",
            R"PT(Questions:
1. What is the color of the bowl?)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'a dog wearing a red collar'
Reasoning: The phrase describes the target category of 'dog' and provides extra information about a red collar. The caption mentions a dog resting under a bench but says nothing about a collar.
Conclusion: The phrase is uncertain. The collar and its color are not mentioned in the caption.)PT",
            R"PT(Questions:
1. Is the dog wearing a collar? If so, what is the color of the collar?)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'the lamp on the left side of the image'
Reasoning: The phrase describes the target category of 'lamp' and claims it is on the left side of the image. The caption mentions a lamp post but does not state where it is in the image.
Conclusion: The phrase is uncertain. The location of the lamp in the image is not mentioned in the caption.)PT",
            R"PT(Questions:
1. Where is the lamp located in the image?)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'a man riding a bicycle'
Reasoning: The phrase describes the target category of 'person' together with the action of riding a bicycle. The caption mentions a man and a bicycle but does not say whether he is riding it.
Conclusion: The phrase is uncertain. The action of riding is not mentioned in the caption.)PT",
            R"PT(Questions:
1. Is the man riding the bicycle or standing next to it?)PT",
            true});
        t.placeholders = {"phrase", "reasoning", "conclusion"};
        t.user_format = "Phrase: <phrase>\nReasoning: <reasoning>\nConclusion: <conclusion>\n";
        add(std::move(t));
    }

    {
        PromptTemplate t;
        t.template_id = "FinetuneTargetArea";
        t.system_text = R"PT(You are an excellent text analyst. I have a phrase that describes an object in an image. I have already analyzed this phrase based on a caption. And I have reached the conclusion that this phrase is uncertain.
First, I want you to help me generate questions asking about the missing information in the caption. I will provide you with my statement of the reason why the phrase is uncertain. As an assistant, please analyze my statement and respond with your generated questions. Ask about the object in the image only. Do not involve the caption in your questions. Ask as few questions as possible.
Secondly, based on the questions you have generated, I want you to give me a target area where the missing information may most likely be found. Choose one receptive field from the following 3 options: 1) the object itself, 2)the object and the surrounding areas, 3)the whole image. Here are some hints for you. If the missing information is about some attribute of the object, such as colors, materials, the target area is likely the object itself 1). If the missing information is something interacting with the object, the target area is likely the object and the surrounding area 2). If the missing information is about another object, the target area is likely the whole image 3). Give me the number of the choices, and only choose one target area per task.)PT";
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'bread loaf on a tan bowl'
Reasoning: The phrase describes a large tan colored bowl with a bread loaf sitting in it. However, the caption does not mention the color or the presence of food in the bowl. The size of the bowl is also not mentioned.
Conclusion: The phrase is uncertain. The color of the bowl, the presence of food and the size of the bowl are not mentioned in the caption.
Questions:
1. What is the color of the bowl?
2. Is there any food in the bowl? If so, what type of food is in the bowl?
3. What is the size of the bowl? Is it small or large?)PT",
            R"PT(Target area:
1)the object itself.)PT",
            false});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'a dog wearing a red collar'
Reasoning: The phrase describes the target category of 'dog' and provides extra information about a red collar. The caption mentions a dog resting under a bench but says nothing about a collar.
Conclusion: The phrase is uncertain. The collar and its color are not mentioned in the caption.
Questions:
1. Is the dog wearing a collar? If so, what is the color of the collar?)PT",
            R"PT(Target area:
1)the object itself.)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'the lamp on the left side of the image'
Reasoning: The phrase describes the target category of 'lamp' and claims it is on the left side of the image. The caption mentions a lamp post but does not state where it is in the image.
Conclusion: The phrase is uncertain. The location of the lamp in the image is not mentioned in the caption.
Questions:
1. Where is the lamp located in the image?)PT",
            R"PT(Target area:
3)the whole image.)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'a bench under a large tree'
Reasoning: The phrase describes the target category of 'bench' and claims it is under a large tree. The caption mentions trees in the park but does not relate any of them to the bench.
Conclusion: The phrase is uncertain. The relation between the bench and a tree is not mentioned in the caption.
Questions:
1. Is the bench under a tree or near any other object?)PT",
            R"PT(Target area:
2)the object and the surrounding areas.)PT",
            true});
        t.examples.push_back(InContextExample{
            R"PT(Phrase: 'a cup next to a stack of books'
Reasoning: The phrase describes the target category of 'cup' and claims it is next to a stack of books. The caption mentions a cup on the desk but does not mention books.
Conclusion: The phrase is uncertain. The books next to the cup are not mentioned in the caption.
Questions:
1. Is there a stack of books next to the cup?)PT",
            R"PT(Target area:
2)the object and the surrounding areas.)PT",
            true});
        t.placeholders = {"phrase", "reasoning", "conclusion", "questions"};
        t.user_format =
            "Phrase: <phrase>\nReasoning: <reasoning>\nConclusion: <conclusion>\nQuestions:\n<questions>\n";
        add(std::move(t));
    }

    {
        PromptTemplate t;
        t.template_id = "VlmToolLanguage";
        t.placeholders = {"category", "expression", "questions"};
        t.user_format =
            "Here are some prior knowledge about this image. The object in the image is a <category>. There is a possible description of this image, it may not be precise enough:<expression>. Answer the following questions. <questions>.";
        add(std::move(t));
    }

    return all;
}

} // namespace realign::detail
